"""Arithmetic-operation bookkeeping shared by the index algorithms."""

from dataclasses import asdict, dataclass


@dataclass
class OpCounter:
    """Multiply/add counts in measure updates and block products.

    Comparisons, divisions for productivity ratios and index bookkeeping are
    not counted.
    """

    refresh_ops: int = 0
    rank1_ops: int = 0
    vector_ops: int = 0
    block_ops: int = 0
    block_products: int = 0
    refreshes: int = 0
    dp_ops: int = 0

    @property
    def total(self) -> int:
        return self.refresh_ops + self.rank1_ops + self.vector_ops + self.block_ops + self.dp_ops

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d
