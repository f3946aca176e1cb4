import numpy as np
import pytest

from tenrec.degrade import (
    NOISE_PRESETS,
    DegradationScenario,
    MissingSpec,
    NoiseSpec,
    corrupt,
    draw_noise,
    make_mask,
    make_mask_nm,
    make_mask_rm,
    parse_scenario,
    sample_composite,
    sample_gaussian,
    sample_laplace,
)
from tenrec.synth import make_synthetic

DIMS = (20, 24, 10)


def test_noise_presets_table():
    assert NOISE_PRESETS["ln1"] == {"kind": "laplace", "b": 3.0}
    assert NOISE_PRESETS["ln2"] == {"kind": "laplace", "b": 5.0}
    assert NOISE_PRESETS["gn1"] == {"kind": "gaussian", "sigma": 3.0}
    assert NOISE_PRESETS["gn2"] == {"kind": "gaussian", "sigma": 5.0}
    assert NOISE_PRESETS["cn1"] == {"kind": "composite", "b": 2.0, "sigma": 2.0}
    assert NOISE_PRESETS["cn2"] == {"kind": "composite", "b": 3.0, "sigma": 3.0}
    assert NOISE_PRESETS["none"] is None


def test_mask_rm_rate_and_determinism():
    mask = make_mask_rm(DIMS, 0.5, seed=0)
    assert mask.shape == DIMS and mask.dtype == np.bool_
    observed = mask.mean()
    assert abs(observed - 0.5) < 0.05
    assert np.array_equal(mask, make_mask_rm(DIMS, 0.5, seed=0))
    assert not np.array_equal(mask, make_mask_rm(DIMS, 0.5, seed=1))


def test_mask_rm_rate_zero():
    assert make_mask_rm(DIMS, 0.0, seed=0).all()


def test_mask_nm_exact_fiber_count():
    rate = 0.3
    mask = make_mask_nm(DIMS, rate, seed=4)
    n1, n2, n3 = DIMS
    fiber_observed = mask.sum(axis=1)  # (n1, n3) counts over the time mode
    # every fiber is all-present or all-absent
    assert set(np.unique(fiber_observed)) <= {0, n2}
    missing_fibers = int((fiber_observed == 0).sum())
    assert missing_fibers == int(np.floor(rate * n1 * n3))


def test_mask_nm_zero_rate():
    assert make_mask_nm(DIMS, 0.0, seed=0).all()


def test_mask_rate_validation():
    with pytest.raises(ValueError):
        make_mask_rm(DIMS, 1.0, seed=0)
    with pytest.raises(ValueError):
        make_mask_nm(DIMS, -0.1, seed=0)


def test_make_mask_dispatch():
    rm = make_mask(MissingSpec("rm", 0.4, seed=7), DIMS)
    nm = make_mask(MissingSpec("nm", 0.4, seed=7), DIMS)
    assert np.array_equal(rm, make_mask_rm(DIMS, 0.4, seed=7))
    assert np.array_equal(nm, make_mask_nm(DIMS, 0.4, seed=7))


def test_sample_laplace_moments():
    draws = sample_laplace(3.0, 200_000, seed=0)
    # Laplace(b): mean 0, variance 2 b^2
    assert abs(draws.mean()) < 0.05
    assert abs(draws.var() - 18.0) < 0.5


def test_sample_gaussian_moments():
    draws = sample_gaussian(5.0, 200_000, seed=0)
    assert abs(draws.mean()) < 0.05
    assert abs(draws.std() - 5.0) < 0.05


def test_sample_composite_is_sum_of_parts():
    seed = 123
    combined = sample_composite(2.0, 2.0, 1000, seed)
    gauss_seed, laplace_seed = np.random.SeedSequence(seed).spawn(2)
    expected = sample_gaussian(2.0, 1000, gauss_seed) + sample_laplace(2.0, 1000, laplace_seed)
    assert np.array_equal(combined, expected)


def test_draw_noise_dispatch():
    assert np.array_equal(
        draw_noise(NoiseSpec("laplace", b=3.0, seed=5), 100), sample_laplace(3.0, 100, 5)
    )
    assert np.array_equal(
        draw_noise(NoiseSpec("gaussian", sigma=4.0, seed=5), 100), sample_gaussian(4.0, 100, 5)
    )


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("laplace", b=0.0)
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", sigma=-1.0)
    with pytest.raises(ValueError):
        NoiseSpec("composite", b=1.0, sigma=0.0)
    with pytest.raises(ValueError):
        NoiseSpec("poisson")


def test_missing_spec_validation():
    with pytest.raises(ValueError):
        MissingSpec("rm", 1.0)
    with pytest.raises(ValueError):
        MissingSpec("block", 0.5)


def test_corrupt_structure():
    x0 = make_synthetic(DIMS, components=3, seed=2)
    scenario = parse_scenario("rm:0.5+ln1", seed=9)
    y, mask, e0 = corrupt(x0, scenario)
    assert y.shape == mask.shape == e0.shape == x0.shape
    # unobserved entries are zero in both y and e0
    assert np.all(y[~mask] == 0.0)
    assert np.all(e0[~mask] == 0.0)
    # observed entries carry truth plus noise
    np.testing.assert_allclose(y[mask], (x0 + e0)[mask], atol=1e-12)
    assert np.abs(e0[mask]).max() > 0.0


def test_corrupt_noise_free():
    x0 = make_synthetic(DIMS, components=3, seed=2)
    y, mask, e0 = corrupt(x0, parse_scenario("rm:0.3", seed=1))
    assert np.all(e0 == 0.0)
    np.testing.assert_allclose(y[mask], x0[mask])


def test_corrupt_deterministic():
    x0 = make_synthetic(DIMS, components=3, seed=2)
    scenario = parse_scenario("nm:0.2+cn1", seed=4)
    y1, m1, e1 = corrupt(x0, scenario)
    y2, m2, e2 = corrupt(x0, scenario)
    assert np.array_equal(y1, y2) and np.array_equal(m1, m2) and np.array_equal(e1, e2)


def test_parse_scenario_forms():
    s = parse_scenario("rm:0.5+ln1", seed=0)
    assert s.missing.kind == "rm" and s.missing.rate == 0.5
    assert s.noise is not None and s.noise.kind == "laplace" and s.noise.b == 3.0
    assert s.label == "rm:0.5+ln1"

    s = parse_scenario("NM:0.3+GN2", seed=0)
    assert s.missing.kind == "nm" and s.noise.sigma == 5.0

    s = parse_scenario("rm:0.7", seed=0)
    assert s.noise is None

    s = parse_scenario("rm:0.4+none", seed=0)
    assert s.noise is None


def test_parse_scenario_seeds_differ():
    a = parse_scenario("rm:0.5+ln1", seed=0)
    b = parse_scenario("rm:0.5+ln1", seed=1)
    assert a.missing.seed != b.missing.seed
    assert a.noise.seed != b.noise.seed
    # mask and noise streams inside one scenario are independent too
    assert a.missing.seed != a.noise.seed


@pytest.mark.parametrize(
    "bad",
    ["", "rm", "rm:", "rm:0.5+", "xx:0.5", "rm:abc", "rm:0.5+zz9", "rm:1.0", "rm:0.5 ln1"],
)
def test_parse_scenario_rejects(bad):
    with pytest.raises(ValueError):
        parse_scenario(bad, seed=0)


def test_scenario_dataclass_frozen():
    s = parse_scenario("rm:0.5+ln1", seed=0)
    assert isinstance(s, DegradationScenario)
    with pytest.raises(AttributeError):
        s.label = "other"
