import json

import pytest

from mhctc.alphabet import LabelAlphabet
from mhctc.audio import SynthConfig, synth_corpus
from mhctc.ctc import ctc_loss
from mhctc.errors import ConfigError, SizeError
from mhctc.mh import HypothesisSet, mh_ctc_loss
from mhctc.model import forward, load_checkpoint
from mhctc.pipeline import (
    CONDITIONS,
    ExperimentPlan,
    _condition_dataset,
    make_splits,
    run_adaptation_condition,
    run_experiment,
    run_pseudo_label_stage,
    run_scenario_seed,
    run_supervised_stage,
)

ALPHA = LabelAlphabet(tuple("abcde"))

# a small plan, sized for test speed rather than for a meaningful ordering
TINY = ExperimentPlan(
    seeds=(0,),
    n_train=10,
    split_sizes=(4, 6, 8),
    len_range=(3, 5),
    hidden=16,
    train_epochs=2,
    finetune_epochs=2,
    adapt_epochs=2,
    beam_width=4,
)


def tiny_corpus(n=20, seed=0):
    cfg = SynthConfig(alphabet=ALPHA, seed=seed)
    return synth_corpus(cfg, n, (3, 5))


class TestSplits:
    def test_disjoint_ids(self):
        split = make_splits(tiny_corpus(), (5, 7, 8), seed=3)
        ids = (
            [u.id for u in split.labeled]
            + [u.id for u in split.unlabeled]
            + [u.id for u in split.test]
        )
        assert len(ids) == len(set(ids)) == 20

    def test_same_seed_same_split(self):
        corpus = tiny_corpus()
        a = make_splits(corpus, (5, 7, 8), seed=9)
        b = make_splits(corpus, (5, 7, 8), seed=9)
        assert [u.id for u in a.labeled] == [u.id for u in b.labeled]
        assert [u.id for u in a.test] == [u.id for u in b.test]

    def test_different_seed_different_split(self):
        corpus = tiny_corpus()
        a = make_splits(corpus, (5, 7, 8), seed=0)
        b = make_splits(corpus, (5, 7, 8), seed=1)
        assert [u.id for u in a.labeled] != [u.id for u in b.labeled]

    def test_all_test(self):
        split = make_splits(tiny_corpus(), (0, 0, 20), seed=0)
        assert not split.labeled and not split.unlabeled
        assert len(split.test) == 20

    def test_oversized_raises(self):
        with pytest.raises(SizeError):
            make_splits(tiny_corpus(), (10, 10, 10), seed=0)


class TestPlan:
    def test_unknown_condition_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(conditions=("no-adapt", "bogus"))

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(scenarios=("clean-train", "dirty-train"))

    def test_config_hash_stable_and_sensitive(self):
        a = ExperimentPlan()
        b = ExperimentPlan()
        c = ExperimentPlan(snr_db=7.0)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()


class TestStages:
    def test_supervised_stage_reduces_labeled_loss(self):
        cache = {}
        scen = run_scenario_seed  # noqa: F841  (documentation of entry point)
        from mhctc.pipeline import _build_systems, _features_for

        sys_a, sys_b = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        corpus = synth_corpus(
            SynthConfig(alphabet=ALPHA, noise_kind="babble", snr_db=6.0, seed=3),
            sum(TINY.split_sizes),
            TINY.len_range,
        )
        split = make_splits(corpus, TINY.split_sizes, seed=0)
        a_hat, _ = run_supervised_stage(sys_a, sys_b, split, TINY, 0, cache)

        def labeled_loss(system):
            feats = _features_for(system, split.labeled, cache)
            return sum(
                ctc_loss(forward(system.params, x), u.labels).loss
                for x, u in zip(feats, split.labeled)
            )

        assert labeled_loss(a_hat) < labeled_loss(sys_a)
        assert "supervised-stage:sysA:seed=0" in a_hat.params.lineage

    def test_empty_labeled_set_skips_stage(self):
        cache = {}
        from mhctc.pipeline import _build_systems

        sys_a, sys_b = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        corpus = tiny_corpus()
        split = make_splits(corpus, (0, 10, 10), seed=0)
        a_hat, b_hat = run_supervised_stage(sys_a, sys_b, split, TINY, 0, cache)
        assert a_hat is sys_a and b_hat is sys_b

    def test_pseudo_label_stage_covers_unlabeled(self):
        cache = {}
        from mhctc.pipeline import _build_systems

        sys_a, sys_b = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        corpus = tiny_corpus()
        split = make_splits(corpus, (4, 6, 8), seed=0)
        hyps_a, hyps_b = run_pseudo_label_stage(sys_a, sys_b, split, TINY, cache)
        ids = {u.id for u in split.unlabeled}
        assert set(hyps_a) == ids == set(hyps_b)


class TestConditionDatasets:
    def _setup(self):
        cache = {}
        from mhctc.pipeline import _build_systems

        sys_a, _ = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        corpus = tiny_corpus()
        split = make_splits(corpus, (4, 6, 8), seed=0)
        hyps = {u.id: (1, 2) for u in split.unlabeled}
        return cache, sys_a, split, hyps

    def test_supervised_labeled_size(self):
        cache, sys_a, split, hyps = self._setup()
        data = _condition_dataset("supervised-labeled", split, hyps, hyps, sys_a, cache)
        assert len(data) == 4

    def test_supervised_all_uses_ground_truth(self):
        cache, sys_a, split, hyps = self._setup()
        data = _condition_dataset("supervised-all", split, hyps, hyps, sys_a, cache)
        assert len(data) == 10
        truths = [u.labels for u in split.unlabeled]
        assert [t for _, t in data[4:]] == truths

    def test_mh_targets_are_hypothesis_sets(self):
        cache, sys_a, split, hyps = self._setup()
        data = _condition_dataset("mh-ctc", split, hyps, hyps, sys_a, cache)
        manual, pseudo = data[:4], data[4:]
        assert all(isinstance(t, HypothesisSet) and len(t.hypotheses) == 1 for _, t in manual)
        assert all(isinstance(t, HypothesisSet) and len(t.hypotheses) == 2 for _, t in pseudo)
        assert pseudo[0][1].source_tags == ("sysA", "sysB")

    def test_identical_hypotheses_double_the_loss(self):
        # with H_A == H_B the combined loss on every unlabeled utterance is
        # exactly twice the single-hypothesis loss
        cache, sys_a, split, hyps = self._setup()
        mh = _condition_dataset("mh-ctc", split, hyps, hyps, sys_a, cache)
        single = _condition_dataset("semi-sup-A", split, hyps, hyps, sys_a, cache)
        for (x, hs), (_, labels) in zip(mh[4:], single[4:]):
            logp = forward(sys_a.params, x)
            combined = mh_ctc_loss(logp, hs).loss
            assert combined == pytest.approx(2.0 * ctc_loss(logp, labels).loss, rel=1e-12)


class TestAdaptationConditions:
    def test_no_adapt_returns_initial(self):
        cache = {}
        from mhctc.pipeline import _build_systems

        sys_a, _ = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        split = make_splits(tiny_corpus(), (4, 6, 8), seed=0)
        out = run_adaptation_condition("no-adapt", sys_a, split, {}, {}, TINY, 0, cache)
        assert out is sys_a

    def test_adaptation_starts_from_initial_model(self):
        # every adapted lineage begins with the initial training step, never
        # with the supervised-stage fine-tune
        cache = {}
        from mhctc.pipeline import _build_systems

        sys_a, _ = _build_systems(TINY, "clean-train", 0, ALPHA, cache)
        split = make_splits(tiny_corpus(), (4, 6, 8), seed=0)
        hyps = {u.id: (1,) for u in split.unlabeled}
        out = run_adaptation_condition("mh-ctc", sys_a, split, hyps, hyps, TINY, 0, cache)
        assert any(step.startswith("train:clean-train:sysA") for step in out.params.lineage)
        assert not any("supervised-stage" in step for step in out.params.lineage)
        assert out.params.lineage[-1] == "adapt:mh-ctc:seed=0"


class TestScenarioAndReport:
    def test_scenario_seed_reports_all_conditions(self, tmp_path):
        out = run_scenario_seed(TINY, "clean-train", 0, run_dir=tmp_path)
        assert set(out["conditions"]) == set(CONDITIONS)
        assert set(out["pseudo_label_wer"]) == {"sysA", "sysB"}
        ckpts = sorted(p.name for p in (tmp_path / "clean-train" / "seed0").glob("*.ckpt"))
        assert ckpts == sorted(f"{c}.ckpt" for c in CONDITIONS)
        params, symbols = load_checkpoint(tmp_path / "clean-train" / "seed0" / "mh-ctc.ckpt")
        assert symbols == ALPHA.symbols
        assert params.lineage[-1] == "adapt:mh-ctc:seed=0"

    def test_hypotheses_persisted(self, tmp_path):
        run_scenario_seed(TINY, "clean-train", 0, run_dir=tmp_path)
        payload = json.loads((tmp_path / "clean-train" / "seed0" / "hypotheses.json").read_text())
        assert set(payload) == {"sysA", "sysB"}
        assert len(payload["sysA"]) == TINY.split_sizes[1]

    def test_rerun_is_deterministic(self):
        a = run_scenario_seed(TINY, "multi-condition-train", 1)
        b = run_scenario_seed(TINY, "multi-condition-train", 1)
        assert a == b

    def test_report_structure_and_relative_reduction(self, tmp_path):
        plan = TINY
        report, run_dir = run_experiment(plan, out_dir=tmp_path)
        assert run_dir.name == f"run-{plan.config_hash()}"
        for scenario in plan.scenarios:
            entry = report["scenarios"][scenario]
            assert set(entry["summary"]) == set(CONDITIONS)
            base = entry["summary"]["supervised-labeled"]["mean_wer"]
            mh = entry["summary"]["mh-ctc"]["mean_wer"]
            want = 100.0 * (base - mh) / base
            assert entry["relative_reduction_mh_vs_baseline"] == pytest.approx(want, abs=1e-3)
        assert (run_dir / "report.json").exists()
        assert (run_dir / "report.txt").exists()

    def test_report_files_byte_identical_across_reruns(self, tmp_path):
        _, dir_a = run_experiment(TINY, out_dir=tmp_path / "a")
        _, dir_b = run_experiment(TINY, out_dir=tmp_path / "b")
        assert (dir_a / "report.json").read_bytes() == (dir_b / "report.json").read_bytes()
        for ckpt in sorted(dir_a.rglob("*.ckpt")):
            twin = dir_b / ckpt.relative_to(dir_a)
            assert ckpt.read_bytes() == twin.read_bytes()
