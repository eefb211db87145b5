import filecmp
import math
import subprocess
import sys

import numpy as np
import pytest

from alfalfa_yield.config import load_config, load_dataset
from alfalfa_yield.experiments import run_pooled, run_tda
from alfalfa_yield.synth import SynthConfig, generate, oracle_eval


def _tree(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_same_seed_gives_identical_files(tmp_path):
    a = generate(SynthConfig(seed=5, samples_per_state=40), tmp_path / "a").root
    b = generate(SynthConfig(seed=5, samples_per_state=40), tmp_path / "b").root
    assert _tree(a) == _tree(b)
    for rel in _tree(a):
        assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


def test_different_seed_differs(tmp_path):
    a = generate(SynthConfig(seed=5, samples_per_state=40), tmp_path / "a").root
    b = generate(SynthConfig(seed=6, samples_per_state=40), tmp_path / "b").root
    assert (a / "weather" / "WS-SA.csv").read_bytes() != (b / "weather" / "WS-SA.csv").read_bytes()


@pytest.mark.parametrize("granularity", ["percut", "annual"])
def test_pipeline_recovers_features(tmp_path, granularity):
    corpus = generate(SynthConfig(seed=3, samples_per_state=45, granularity=granularity), tmp_path)
    data, diags = load_dataset(load_config(corpus.config_file))
    assert diags == []
    assert data.state_counts() == {"SA": 45, "SB": 45}
    expected = {s.source_id: s for s in corpus.expected.samples}
    got = {s.source_id: s for s in data.samples}
    assert set(expected) == set(got)
    for sid, s in got.items():
        assert np.allclose(s.features(), expected[sid].features(), rtol=0, atol=1e-9)
        assert s.target_yield == pytest.approx(expected[sid].target_yield, abs=1e-12)


def test_noiseless_targets_equal_oracle(synth_corpus):
    data, _ = load_dataset(load_config(synth_corpus.config_file))
    for s in data.samples:
        assert s.target_yield == pytest.approx(oracle_eval(s.features()), abs=1e-9)
        assert synth_corpus.truth[s.source_id] == pytest.approx(s.target_yield, abs=1e-9)


def test_noise_is_added(tmp_path):
    corpus = generate(SynthConfig(seed=3, samples_per_state=80, noise_sd=0.2), tmp_path)
    resid = np.array([s.target_yield - corpus.truth[s.source_id] for s in corpus.expected.samples])
    assert 0.1 < resid.std() < 0.3


def test_oracle_is_a_function():
    f = (150.0, 700.0, 900.0, 4.0, 72.0)
    assert oracle_eval(f) == oracle_eval(list(f))
    code = "from alfalfa_yield.synth import oracle_eval; print(repr(oracle_eval((150.0, 700.0, 900.0, 4.0, 72.0))))"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert float(out) == oracle_eval(f)


def test_oracle_shape():
    base = [150.0, 700.0, 900.0, 4.0, 73.0]
    # temperature optimum
    assert oracle_eval(base) > oracle_eval(base[:4] + [70.0]) > oracle_eval(base[:4] + [65.0])
    # saturating rain
    gains = [oracle_eval(base[:3] + [r] + base[4:]) for r in (0.0, 2.0, 4.0, 6.0)]
    steps = np.diff(gains)
    assert np.all(steps > 0) and np.all(np.diff(steps) < 0)
    # linear in stand age
    assert math.isclose(oracle_eval([150, 800, 900, 4, 73]) - oracle_eval([150, 700, 900, 4, 73]),
                        oracle_eval([150, 900, 900, 4, 73]) - oracle_eval([150, 800, 900, 4, 73]))


def test_climate_offsets_shift_features(tmp_path):
    corpus = generate(SynthConfig(seed=2, samples_per_state=60, temp_shift=(0.0, -6.0), rain_scale=(1.0, 0.5)),
                      tmp_path)
    d = corpus.expected
    a, b = d.select_states(["SA"]), d.select_states(["SB"])
    assert a.X[:, 4].mean() - b.X[:, 4].mean() == pytest.approx(6.0, abs=1.0)
    assert b.X[:, 3].mean() < 0.6 * a.X[:, 3].mean()


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(noise_sd=-1)
    with pytest.raises(ValueError):
        SynthConfig(samples_per_state=0)
    with pytest.raises(ValueError):
        SynthConfig(n_states=2, state_codes=("AA",)).codes()


@pytest.mark.slow
def test_twin_states_tree_family(tmp_path):
    """Identical noiseless states: pooled tree R^2 >= 0.95 and TDA within 0.05 of it."""
    data = generate(SynthConfig(seed=42, samples_per_state=250), tmp_path).expected
    fams = ["dt", "rf"]
    pooled = run_pooled(data, fams, seed=42)
    for fam in fams:
        assert pooled.reports[fam].mean("r2") >= 0.95, fam
    for src, tgt in (("SA", "SB"), ("SB", "SA")):
        rep = run_tda(data, [src], tgt, fams, seed=42)
        for fam in fams:
            gap = abs(rep.results[fam].metrics.r2 - pooled.reports[fam].mean("r2"))
            assert gap < 0.05, (src, tgt, fam, gap)
