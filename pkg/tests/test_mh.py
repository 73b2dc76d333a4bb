import math

import numpy as np
import pytest

from mhctc.ctc import ctc_loss, ctc_loss_bruteforce
from mhctc.errors import InfeasibleAlignment, InvalidInput
from mhctc.mh import HypothesisSet, mh_ctc_loss, product_form_check

from helpers import random_instance, random_logp


def hs(*hyps):
    return HypothesisSet(hypotheses=hyps, source_tags=tuple(f"sys{i}" for i in range(len(hyps))))


class TestHypothesisSet:
    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            HypothesisSet(hypotheses=(), source_tags=())

    def test_duplicate_tags_rejected(self):
        with pytest.raises(InvalidInput):
            HypothesisSet(hypotheses=((1,), (2,)), source_tags=("a", "a"))


class TestMhCtcLoss:
    def test_identical_hypotheses_double(self):
        rng = np.random.default_rng(0)
        logp, labels = random_instance(rng)
        single = ctc_loss(logp, labels).loss
        combined = mh_ctc_loss(logp, hs(labels, labels))
        assert combined.loss == pytest.approx(2 * single, rel=1e-12)
        np.testing.assert_allclose(
            combined.grad, 2 * ctc_loss(logp, labels).grad, rtol=0, atol=1e-15
        )

    def test_n1_degeneracy(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            logp, labels = random_instance(rng)
            a = ctc_loss(logp, labels)
            b = mh_ctc_loss(logp, hs(labels))
            assert abs(a.loss - b.loss) <= 1e-15 * max(1.0, abs(a.loss))
            np.testing.assert_array_equal(a.grad, b.grad)

    def test_product_form_against_bruteforce(self):
        rng = np.random.default_rng(2)
        logp = random_logp(rng, 6, 4)
        c1, c2 = (1, 2), (3, 1, 2)
        combined = mh_ctc_loss(logp, hs(c1, c2))
        # exp(-loss) equals the product of the two brute-force path sums
        ref = ctc_loss_bruteforce(logp, c1) + ctc_loss_bruteforce(logp, c2)
        assert abs(combined.loss - ref) / max(1.0, abs(ref)) <= 1e-10

    def test_infeasible_carries_index(self):
        logp = random_logp(np.random.default_rng(3), 2, 3)
        with pytest.raises(InfeasibleAlignment) as exc:
            mh_ctc_loss(logp, hs((1,), (1, 1, 2)))
        assert exc.value.hypothesis_index == 1

    def test_additivity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            logp, c1 = random_instance(rng)
            _, c2 = random_instance(rng, max_T=logp.shape[0], max_syms=logp.shape[1] - 1)
            if len(c2) > 0 and max(c2) >= logp.shape[1]:
                continue
            try:
                combined = mh_ctc_loss(logp, hs(c1, c2))
            except InfeasibleAlignment:
                continue
            assert abs(combined.loss - sum(combined.per_hypothesis)) <= 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        logp = random_logp(rng, 5, 3)
        a = mh_ctc_loss(logp, hs((1,), (2, 1)))
        b = mh_ctc_loss(logp, hs((2, 1), (1,)))
        assert abs(a.loss - b.loss) <= 1e-12
        np.testing.assert_allclose(a.grad, b.grad, rtol=0, atol=1e-12)

    def test_empty_hypothesis_is_valid(self):
        logp = random_logp(np.random.default_rng(6), 4, 3)
        res = mh_ctc_loss(logp, hs((), (1,)))
        assert math.isfinite(res.loss)


class TestProductFormCheck:
    def test_identical_is_double(self):
        logp = random_logp(np.random.default_rng(7), 5, 3)
        c = (1, 2)
        assert product_form_check(logp, c, c) == pytest.approx(
            2 * ctc_loss_bruteforce(logp, c), rel=1e-12
        )

    def test_matches_mh_loss(self):
        rng = np.random.default_rng(8)
        logp = random_logp(rng, 6, 4)
        c1, c2 = (2,), (1, 3)
        ref = product_form_check(logp, c1, c2)
        val = mh_ctc_loss(logp, hs(c1, c2)).loss
        assert abs(val - ref) / max(1.0, abs(ref)) <= 1e-10

    def test_infeasible_second_factor(self):
        logp = random_logp(np.random.default_rng(9), 2, 3)
        assert product_form_check(logp, (1,), (2, 2, 1)) == math.inf
