"""Multiple-hypothesis CTC loss: sum of CTC losses over N 1-best hypotheses.

Summing the per-hypothesis losses is the same as taking -log of the
product of the per-hypothesis path sums, so identical hypotheses are kept
as-is (a duplicate doubles that utterance's gradient weight on purpose).
"""

from dataclasses import dataclass, field

import numpy as np

from .ctc import ctc_loss, ctc_loss_bruteforce
from .errors import InfeasibleAlignment, InvalidInput


@dataclass(frozen=True)
class HypothesisSet:
    """N transcriptions of one utterance, tagged by producing system."""

    hypotheses: tuple
    source_tags: tuple

    def __post_init__(self):
        hyps = tuple(tuple(h) for h in self.hypotheses)
        tags = tuple(self.source_tags)
        object.__setattr__(self, "hypotheses", hyps)
        object.__setattr__(self, "source_tags", tags)
        if len(hyps) < 1:
            raise InvalidInput("a hypothesis set needs at least one hypothesis")
        if len(tags) != len(hyps):
            raise InvalidInput("one source tag per hypothesis required")
        if len(set(tags)) != len(tags):
            raise InvalidInput("source tags must be unique")

    def __len__(self):
        return len(self.hypotheses)


@dataclass
class CombinedLossResult:
    loss: float
    per_hypothesis: list = field(default_factory=list)
    grad: np.ndarray = None


def mh_ctc_loss(logp, hs):
    """Combined loss over all hypotheses in ``hs`` plus the summed gradient.

    An infeasible hypothesis raises InfeasibleAlignment with
    ``hypothesis_index`` set; the caller decides the skip policy.
    """
    per = []
    grad = None
    for i, hyp in enumerate(hs.hypotheses):
        try:
            res = ctc_loss(logp, hyp)
        except InfeasibleAlignment as exc:
            raise InfeasibleAlignment(
                f"hypothesis {i} ({hs.source_tags[i]}) infeasible: {exc}",
                hypothesis_index=i,
            ) from exc
        per.append(res.loss)
        grad = res.grad if grad is None else grad + res.grad
    return CombinedLossResult(loss=float(sum(per)), per_hypothesis=per, grad=grad)


def product_form_check(logp, c1, c2):
    """-log of the product of the two brute-force path sums (N=2 oracle).

    Enumerates both path sets explicitly; +inf when either factor is empty.
    """
    return ctc_loss_bruteforce(logp, c1) + ctc_loss_bruteforce(logp, c2)
