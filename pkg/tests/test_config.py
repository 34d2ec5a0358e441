"""Config parsing, validation, overrides, and seed-stream derivation."""

import numpy as np
import pytest

from diffbound.config import (
    DEFAULT_CONFIG_TEXT,
    ConfigError,
    derived_rng,
    load_config,
    parse_config_text,
    render_config,
)


class TestDefaults:
    def test_empty_load_gives_documented_defaults(self):
        cfg = load_config()
        assert cfg.config_version == 1
        assert cfg.data_generator == "uniform_square"
        assert cfg.n_train == 50000
        assert cfg.T == 50
        assert cfg.schedule_family == "linear"
        assert (cfg.beta_start, cfg.beta_end) == (1e-4, 0.2)
        assert cfg.hidden == (128, 128)
        assert cfg.steps == 20000
        assert cfg.bound_n == 5000
        assert cfg.lambda_factors == (0.1, 0.2, 0.5, 1.0, 2.0, 10.0)
        assert cfg.delta == 0.05
        assert cfg.k_source == "schedule"
        assert cfg.mode == "monte-carlo"
        assert (cfg.seed_data, cfg.seed_train, cfg.seed_bound, cfg.seed_validate) == (1, 2, 3, 4)
        assert cfg.workers == 1
        assert cfg.plots is True

    def test_default_text_parses_to_defaults(self):
        assert load_config(text=DEFAULT_CONFIG_TEXT) == load_config()

    def test_lambda_list_from_factors(self):
        cfg = load_config()
        assert cfg.lambda_list() == [500.0, 1000.0, 2500.0, 5000.0, 10000.0, 50000.0]

    def test_explicit_lambdas_win(self):
        cfg = load_config(sets=("bound.lambdas=3,7",))
        assert cfg.lambda_list() == [3.0, 7.0]


class TestParsing:
    def test_comments_and_blanks_skipped(self):
        text = "# heading\n\n  schedule.T = 9  \n# tail\n"
        cfg = load_config(text=text)
        assert cfg.T == 9

    def test_tuple_values(self):
        cfg = load_config(text="net.hidden = 64,32,16\nbound.probe_scales = 0.5,2.0\n")
        assert cfg.hidden == (64, 32, 16)
        assert cfg.probe_scales == (0.5, 2.0)

    def test_bool_spellings(self):
        for raw, want in (("true", True), ("off", False), ("1", True), ("no", False)):
            assert load_config(text=f"plots = {raw}\n").plots is want

    def test_unknown_key_reports_location(self):
        with pytest.raises(ConfigError, match=r"<text>:2.*unknown key 'schedule\.evil'"):
            load_config(text="schedule.T = 5\nschedule.evil = 1\n")

    def test_duplicate_key_reports_both_lines(self):
        with pytest.raises(ConfigError, match=r"<text>:3.*duplicate.*<text>:1"):
            load_config(text="schedule.T = 5\n\nschedule.T = 6\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            load_config(text="schedule.T 5\n")

    def test_bad_value_type(self):
        with pytest.raises(ConfigError, match=r"<text>:1.*schedule\.T"):
            load_config(text="schedule.T = soon\n")

    def test_constraint_message_and_location(self):
        with pytest.raises(ConfigError, match=r"<text>:1.*must be >= 1"):
            load_config(text="train.steps = 0\n")
        with pytest.raises(ConfigError, match="one of"):
            load_config(text="bound.k_source = guessed\n")

    def test_parse_config_text_returns_locations(self):
        got = parse_config_text("schedule.T = 4\n", source="run.cfg")
        assert got == {"schedule.T": ("4", "run.cfg:1")}

    def test_file_loading(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("schedule.T = 12\ndata.n_train = 100\n")
        cfg = load_config(p)
        assert (cfg.T, cfg.n_train) == (12, 100)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.cfg")


class TestOverrides:
    def test_set_overrides_file_value(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("schedule.T = 12\n")
        cfg = load_config(p, sets=("schedule.T=8",))
        assert cfg.T == 8

    def test_set_error_location(self):
        with pytest.raises(ConfigError, match=r"--set #2"):
            load_config(sets=("schedule.T=5", "bogus.key=1"))
        with pytest.raises(ConfigError, match=r"--set #1.*key=value"):
            load_config(sets=("schedule.T",))

    def test_later_set_wins(self):
        cfg = load_config(sets=("schedule.T=5", "schedule.T=9"))
        assert cfg.T == 9


class TestCrossChecks:
    def test_beta_ordering(self):
        with pytest.raises(ConfigError, match="beta_start"):
            load_config(text="schedule.beta_start = 0.5\nschedule.beta_end = 0.1\n")
        # constant family does not use the pair, so no complaint
        load_config(text="schedule.family = constant\nschedule.beta_start = 0.5\nschedule.beta_end = 0.1\n")

    def test_lambda_sources_cannot_both_be_empty(self):
        with pytest.raises(ConfigError, match="nonempty"):
            load_config(text="bound.lambda_factors =\n")

    def test_contraction_steps_within_schedule(self):
        with pytest.raises(ConfigError, match="<= schedule.T"):
            load_config(text="schedule.T = 4\nvalidate.contraction_steps = 1,5\n")
        cfg = load_config(text="schedule.T = 4\nvalidate.contraction_steps = 1,4\n")
        assert cfg.validate_steps == (1, 4)


class TestBridges:
    def test_build_schedule_families(self):
        lin = load_config(sets=("schedule.T=6",)).build_schedule()
        assert lin.T == 6
        con = load_config(sets=("schedule.family=constant", "schedule.T=4", "schedule.beta=0.25")).build_schedule()
        assert np.allclose(con.alphas, 0.75)
        cos = load_config(sets=("schedule.family=cosine", "schedule.T=5")).build_schedule()
        assert cos.T == 5

    def test_draw_data_generators(self):
        sq = load_config(sets=("data.side=4.0",)).draw_data(10, np.random.default_rng(0))
        assert sq.source == "uniform_square"
        assert np.all(np.abs(sq.points) <= 2.0)
        ci = load_config(sets=("data.generator=uniform_circle", "data.radius=0.5",)).draw_data(
            10, np.random.default_rng(0))
        assert ci.source == "uniform_circle"
        assert np.allclose(np.linalg.norm(ci.points, axis=1), 0.5)

    def test_train_and_mc_bridges(self):
        cfg = load_config(sets=("train.batch_size=33", "bound.chunk_size=1024", "workers=3"))
        tc = cfg.train_config()
        assert tc.batch_size == 33
        assert tc.seed == cfg.seed_train
        mc = cfg.mc_config()
        assert (mc.chunk_size, mc.workers) == (1024, 3)

    def test_to_dict_lists_tuples(self):
        d = load_config().to_dict()
        assert d["hidden"] == [128, 128]
        assert d["delta"] == 0.05


class TestRender:
    def test_roundtrip_through_renderer(self):
        cfg = load_config(sets=("schedule.T=7", "net.hidden=3,4", "plots=false",
                                "train.learning_rate=0.0025"))
        again = load_config(text=render_config(cfg))
        assert again == cfg

    def test_rendered_floats_keep_precision(self):
        cfg = load_config(sets=("train.learning_rate=1e-07",))
        assert "train.learning_rate = 1e-07" in render_config(cfg)


class TestDerivedRng:
    def test_deterministic(self):
        a = derived_rng(3, 1).standard_normal(5)
        b = derived_rng(3, 1).standard_normal(5)
        assert np.array_equal(a, b)

    def test_distinct_keys_give_distinct_streams(self):
        draws = {tuple(derived_rng(3, k).standard_normal(4)) for k in range(6)}
        assert len(draws) == 6
        deep = derived_rng(3, 1, 2).standard_normal(4)
        shallow = derived_rng(3, 1).standard_normal(4)
        assert not np.array_equal(deep, shallow)

    def test_matches_numpy_spawn_convention(self):
        want = np.random.default_rng(np.random.SeedSequence(9, spawn_key=(2,))).standard_normal(3)
        got = derived_rng(9, 2).standard_normal(3)
        assert np.array_equal(want, got)
