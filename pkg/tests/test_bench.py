import csv
import io

import numpy as np
import pytest

from lowrank_sdp import bench
from lowrank_sdp.bench import ExperimentConfig, generate_instance
from lowrank_sdp.solver import SolverSettings


def test_generate_full_exact():
    obs = generate_instance(4, 3, 3, 0.0, 1.0, seed=1)
    assert len(obs.omega) == 12
    assert np.linalg.matrix_rank(obs.A) <= 3


def test_generate_size_and_determinism():
    a = generate_instance(6, 5, 2, 0.1, 0.5, seed=7)
    b = generate_instance(6, 5, 2, 0.1, 0.5, seed=7)
    c = generate_instance(6, 5, 2, 0.1, 0.5, seed=8)
    assert len(a.omega) == 15
    assert np.array_equal(a.A, b.A) and a.omega == b.omega
    assert not np.array_equal(a.A, c.A)


def test_generated_noise_is_standard_normal():
    obs = generate_instance(60, 60, 1, 0.0, 1.0, seed=3)
    z = bench._normals(np.random.Generator(np.random.Philox(key=0)), 20000)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03
    assert obs.A.shape == (60, 60)


def test_generate_rejects_bad_rank():
    with pytest.raises(ValueError):
        generate_instance(3, 3, 4, 0.1, 0.5, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(p=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=[])
    with pytest.raises(ValueError):
        ExperimentConfig(relaxations=["nope"])
    assert ExperimentConfig(n=5).m == 5


def small_sweep(**kw):
    cfg = ExperimentConfig(n=4, p=0.75, gammas=[1.0, 100.0], seeds=[0, 1],
                           relaxations=["mprt", "compact"], **kw)
    return cfg, bench.run_gamma_sweep(cfg)


def test_sweep_rows_and_ordering():
    cfg, rows = small_sweep()
    assert len(rows) == 2 * 2 * 2
    keys = [(r["seed"], r["gamma"], r["relaxation"]) for r in rows]
    assert keys == sorted(keys, key=lambda k: (k[0], k[1], ["mprt", "compact"].index(k[2])))
    for r in rows:
        assert r["status"] == "optimal"
        assert r["lower_bound"] <= r["upper_bound"] + 1e-4 * (1 + abs(r["upper_bound"]))
    by = {(r["seed"], r["gamma"], r["relaxation"]): r["lower_bound"] for r in rows}
    for seed in (0, 1):
        for g in cfg.gammas:
            assert by[seed, g, "mprt"] <= by[seed, g, "compact"] + 1e-4 * (1 + abs(by[seed, g, "compact"]))


def test_csv_deterministic_apart_from_times():
    _, a = small_sweep()
    _, b = small_sweep()
    strip = lambda rows: [{k: v for k, v in r.items() if not k.endswith("time_s")} for r in rows]  # noqa: E731
    assert strip(a) == strip(b)
    text = bench.format_csv(a)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0].keys()) == list(bench.HEADER)
    assert len(parsed) == len(a)


def test_compact_not_looser_than_full_perm():
    obs = generate_instance(3, 3, 2, 0.1, 0.8, seed=2)
    s = SolverSettings()
    comp = bench.solve_cell("compact", obs, 10.0, 2, 0.0, s)
    full = bench.solve_cell("full-perm", obs, 10.0, 2, 0.0, s)
    ub = bench.upper_bound(obs, 10.0, 2, 0.0)
    assert bench.gap(ub, comp.lower_bound) >= bench.gap(ub, full.lower_bound) - 1e-3


def test_scaling_smoke(tmp_path):
    cfg = ExperimentConfig(sizes=[4], seeds=[0], relaxations=["reduced"], r=2)
    rows = bench.run_scaling(cfg)
    assert len(rows) == 1
    r = rows[0]
    assert r["gamma"] == pytest.approx(1e4 / 16)
    assert np.isfinite(r["lower_bound"]) and r["lower_bound"] <= r["upper_bound"] + 1e-4
    path = tmp_path / "scale.csv"
    bench.write_csv(rows, path)
    assert path.read_text().startswith(",".join(bench.HEADER))
    with pytest.raises(ValueError):
        bench.run_scaling(ExperimentConfig(sizes=[4], seeds=[0], relaxations=["mprt"]))


def test_build_relaxation_names():
    obs = generate_instance(3, 3, 1, 0.0, 0.7, seed=0)
    for name in ("mprt", "full", "full-perm", "compact", "reduced", "grouped", "bp-full", "bp-reduced"):
        assert bench.build_relaxation(name, obs, 10.0, 1).num_rows > 0
    with pytest.raises(ValueError):
        bench.build_relaxation("rrr-lifted", obs, 10.0, 1)
