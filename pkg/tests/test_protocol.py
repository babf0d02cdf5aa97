import random

import pytest

from tapstroop.device import ContactEvent
from tapstroop.protocol import (
    Block,
    BlockOrder,
    DuplicateResponse,
    EarlyResponse,
    IgnoredContact,
    InsufficientData,
    InvalidConfig,
    RtPolicy,
    SessionConfig,
    SessionEngine,
    Trial,
    build_schedule,
    summarize,
)
from tapstroop.signal import Material


def contact(t_us=1_000_000, velocity=0.5, tick=0):
    return ContactEvent(timestamp_us=t_us, velocity=velocity, tick_index=tick)


class TestSchedule:
    def test_deterministic_per_seed(self):
        cfg = SessionConfig(seed=7)
        assert build_schedule(cfg) == build_schedule(cfg)

    def test_different_seeds_differ(self):
        orders = {
            tuple(t.visual_material for t in build_schedule(SessionConfig(seed=s)))
            for s in range(20)
        }
        assert len(orders) > 1

    def test_block_composition(self):
        for seed in range(200):
            trials = build_schedule(SessionConfig(seed=seed))
            assert len(trials) == 18
            for block in Block:
                block_trials = [t for t in trials if t.block is block]
                visuals = [t.visual_material for t in block_trials]
                assert visuals.count(Material.RUBBER) == 3
                assert visuals.count(Material.ALUMINUM) == 3
            for t in trials:
                if t.block is Block.PRACTICE:
                    assert t.tactile_material is None
                elif t.block is Block.CONGRUENT:
                    assert t.tactile_material is t.visual_material
                else:
                    assert t.tactile_material is not None
                    assert t.tactile_material is not t.visual_material

    def test_block_order_variants(self):
        cfg = SessionConfig(seed=1, block_order=BlockOrder.PRACTICE_INCONGRUENT_CONGRUENT)
        blocks = [t.block for t in build_schedule(cfg)]
        assert blocks[:6] == [Block.PRACTICE] * 6
        assert blocks[6:12] == [Block.INCONGRUENT] * 6
        assert blocks[12:] == [Block.CONGRUENT] * 6

    def test_odd_trials_rejected(self):
        with pytest.raises(InvalidConfig):
            SessionConfig(seed=0, trials_per_condition=5)
        with pytest.raises(InvalidConfig):
            SessionConfig(seed=0, trials_per_condition=0)

    def test_indices_sequential(self):
        trials = build_schedule(SessionConfig(seed=3))
        assert [t.index for t in trials] == list(range(18))


def synthetic_trials(congruent_rts, incongruent_rts, correct=True):
    trials = []
    for i, rt in enumerate(congruent_rts):
        trials.append(
            Trial(
                index=i,
                block=Block.CONGRUENT,
                visual_material=Material.RUBBER,
                tactile_material=Material.RUBBER,
                rt_ms=rt,
                correct=correct,
                response_material=Material.RUBBER,
            )
        )
    for i, rt in enumerate(incongruent_rts):
        trials.append(
            Trial(
                index=100 + i,
                block=Block.INCONGRUENT,
                visual_material=Material.RUBBER,
                tactile_material=Material.ALUMINUM,
                rt_ms=rt,
                correct=correct,
                response_material=Material.RUBBER,
            )
        )
    return trials


class TestSummarize:
    def test_worked_delta_60(self):
        trials = synthetic_trials([500.0, 520.0, 540.0], [560.0, 580.0, 600.0])
        s = summarize(trials)
        assert s.mean_rt_congruent_ms == pytest.approx(520.0)
        assert s.mean_rt_incongruent_ms == pytest.approx(580.0)
        assert s.stroop_delta_ms == pytest.approx(60.0)

    def test_identical_multisets_zero_delta(self):
        trials = synthetic_trials([480.0, 505.0, 530.0], [530.0, 480.0, 505.0])
        assert summarize(trials).stroop_delta_ms == 0.0

    def test_delta_exactly_difference_of_means(self):
        trials = synthetic_trials([500.1, 517.3], [560.7, 601.9])
        s = summarize(trials)
        assert s.stroop_delta_ms == s.mean_rt_incongruent_ms - s.mean_rt_congruent_ms

    def test_permutation_invariant(self):
        rng = random.Random(5)
        trials = synthetic_trials(
            [rng.uniform(400, 700) for _ in range(6)],
            [rng.uniform(400, 700) for _ in range(6)],
        )
        base = summarize(trials)
        for _ in range(10):
            shuffled = trials[:]
            rng.shuffle(shuffled)
            assert summarize(shuffled) == base

    def test_correct_only_excludes_errors_from_means(self):
        trials = synthetic_trials([500.0, 600.0], [700.0, 800.0])
        trials[1].correct = False  # congruent 600 excluded from the mean
        s = summarize(trials, RtPolicy.CORRECT_ONLY)
        assert s.mean_rt_congruent_ms == 500.0
        assert s.accuracy_congruent == 0.5
        assert s.n_used_congruent == 1
        s_all = summarize(trials, RtPolicy.ALL_RESPONSES)
        assert s_all.mean_rt_congruent_ms == 550.0
        assert s_all.n_used_congruent == 2

    def test_all_incorrect_is_insufficient(self):
        trials = synthetic_trials([500.0, 510.0], [600.0, 610.0])
        for t in trials:
            if t.block is Block.INCONGRUENT:
                t.correct = False
        with pytest.raises(InsufficientData):
            summarize(trials, RtPolicy.CORRECT_ONLY)

    def test_practice_excluded(self):
        trials = synthetic_trials([500.0], [560.0])
        trials.append(
            Trial(
                index=50,
                block=Block.PRACTICE,
                visual_material=Material.RUBBER,
                tactile_material=None,
                rt_ms=10_000.0,
                correct=True,
            )
        )
        s = summarize(trials)
        assert s.mean_rt_congruent_ms == 500.0


class TestEngine:
    def make_engine(self, materials, seed=7, **kwargs):
        events = []
        cfg = SessionConfig(seed=seed, **kwargs)
        engine = SessionEngine(cfg, materials, on_event=lambda k, t, p: events.append((k, t, p)))
        return engine, events

    def run_trial(self, engine, t_us, velocity=0.5, correct=True, rt_us=512_000):
        trial = engine.start_next_trial(t_us)
        engine.on_contact(contact(t_us + 1000, velocity))
        key = trial.visual_material if correct else trial.visual_material.other
        engine.on_response(key, t_us + 1000 + rt_us, trial_index=trial.index)
        return trial

    def test_full_session_event_stream(self, materials):
        engine, events = self.make_engine(materials)
        t = 1_000_000
        while not engine.complete:
            self.run_trial(engine, t)
            t += 1_000_000
        kinds = [k for k, _, _ in events]
        assert kinds.count("TrialStart") == 18
        assert kinds.count("TrialResult") == 18
        assert kinds.count("BlockEnd") == 3
        assert kinds.count("SessionEnd") == 1
        assert kinds[-1] == "SessionEnd"
        s = engine.summary()
        assert s.accuracy_congruent == 1.0

    def test_rt_arithmetic(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        engine.on_contact(contact(1_000_000))
        trial = engine.on_response(engine.schedule[0].visual_material, 1_512_000, trial_index=0)
        assert trial.rt_ms == 512.0
        assert trial.correct is True

    def test_practice_has_no_tactile(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        assignment = engine.on_contact(contact(velocity=0.5))
        assert assignment.tactile_params is None
        assert assignment.tactile_velocity is None

    def test_incongruent_assignment_and_clamp(self, materials):
        engine, _ = self.make_engine(materials)
        # finish practice
        t = 1_000_000
        for _ in range(6):
            self.run_trial(engine, t)
            t += 1_000_000
        trial = engine.current_trial
        engine.start_next_trial(t)
        assignment = engine.on_contact(contact(t + 10, velocity=1.4))
        assert assignment.visual_texture is trial.visual_material
        assert assignment.tactile_params.material is trial.tactile_material
        assert assignment.tactile_velocity == 1.0  # clamped to the session limit

    def test_response_before_contact(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        with pytest.raises(EarlyResponse):
            engine.on_response(Material.RUBBER, 1_000_000)
        # trial still pending: contact then response succeeds
        engine.on_contact(contact())
        engine.on_response(engine.schedule[0].visual_material, 2_000_000, trial_index=0)
        assert engine.schedule[0].rt_ms is not None

    def test_duplicate_response(self, materials):
        engine, _ = self.make_engine(materials)
        self.run_trial(engine, 1_000_000)
        with pytest.raises(DuplicateResponse):
            engine.on_response(Material.RUBBER, 3_000_000, trial_index=0)

    def test_contact_without_armed_trial(self, materials):
        engine, _ = self.make_engine(materials)
        with pytest.raises(IgnoredContact):
            engine.on_contact(contact())

    def test_second_contact_ignored(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        engine.on_contact(contact(1_000_000))
        with pytest.raises(IgnoredContact):
            engine.on_contact(contact(1_100_000, tick=1))
        # state unchanged: the original onset still scores the response
        trial = engine.on_response(engine.schedule[0].visual_material, 1_600_000, trial_index=0)
        assert trial.rt_ms == 600.0

    def test_response_not_after_onset_rejected(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        engine.on_contact(contact(1_000_000))
        with pytest.raises(ValueError):
            engine.on_response(Material.RUBBER, 1_000_000)

    def test_displayed_override_sets_onset(self, materials):
        engine, _ = self.make_engine(materials)
        engine.start_next_trial(0)
        engine.on_contact(contact(1_000_000))
        trial = engine.on_response(
            engine.schedule[0].visual_material, 2_000_000, trial_index=0, displayed_us=1_750_000
        )
        assert trial.rt_ms == 250.0
        assert trial.stimulus_onset_us == 1_750_000
