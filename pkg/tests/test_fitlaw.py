import math

import numpy as np
import pytest

from src.core.errors import (
    ConvergenceError,
    InsufficientVariationError,
    InvalidArgumentError,
    InvalidCompositionError,
    UnderdeterminedError,
    UnitMismatchError,
)
from src.core.types import LossUnit
from src.fitlaw import (
    LawBundle,
    compute_to_loss_curve,
    compute_to_loss_jacobian,
    estimate_irreducible_fallback,
    fit_compute_to_loss,
    fit_groups,
    fit_irreducible,
    fit_loss_to_loss,
    loss_to_loss_curve,
    loss_to_loss_jacobian,
    nlls_fit,
    predict_y,
    r_squared,
)
from src.ingest import ConfigGroup, RecordSet, group_by_config, load_records
from src.synth import generate

from tests.conftest import make_config, make_l2l, make_record, pairs_group, wide_world


def _single_group(rs: RecordSet) -> ConfigGroup:
    groups = group_by_config(rs)
    assert len(groups) == 1
    return groups[0]


def _central_difference(fn, theta, inputs, step=1e-6):
    columns = []
    for i in range(theta.size):
        h = step * max(1.0, abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        columns.append((fn(up, inputs) - fn(down, inputs)) / (2 * h))
    return np.column_stack(columns)


def test_nlls_fit_exact_line():
    params, diag = nlls_fit(
        lambda p, x: p[0] * x, np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0]), [(-10.0, 10.0)], [[1.0]]
    )
    assert params[0] == pytest.approx(2.0, rel=1e-10)
    assert diag.sse == pytest.approx(0.0, abs=1e-18)
    assert diag.n_starts_tried == 1
    assert diag.best_start_index == 0


def test_nlls_fit_constant_model():
    params, _ = nlls_fit(
        lambda p, x: np.full(x.shape, p[0]), np.zeros(2), np.array([5.0, 5.0]), [(0.0, 10.0)], [[1.0]]
    )
    assert params[0] == pytest.approx(5.0, rel=1e-10)


def test_nlls_fit_power_law_recovery():
    x = np.linspace(0.5, 3.0, 50)
    y = 2.0 * x**0.7
    params, diag = nlls_fit(
        lambda p, v: p[0] * v ** p[1], x, y, [(1e-6, 100.0), (0.01, 5.0)], [[1.0, 1.0], [5.0, 2.0]]
    )
    assert params[0] == pytest.approx(2.0, rel=1e-6)
    assert params[1] == pytest.approx(0.7, rel=1e-6)
    assert diag.converged
    assert diag.n_starts_tried == 2


def test_nlls_fit_skips_starts_outside_bounds():
    _, diag = nlls_fit(
        lambda p, x: p[0] * x, np.array([1.0, 2.0]), np.array([2.0, 4.0]), [(0.0, 10.0)], [[50.0], [1.0]]
    )
    assert diag.n_starts_tried == 1
    assert diag.best_start_index == 1
    with pytest.raises(InvalidArgumentError):
        nlls_fit(lambda p, x: p[0] * x, np.array([1.0, 2.0]), np.array([2.0, 4.0]), [(0.0, 10.0)], [[50.0]])


def test_nlls_fit_underdetermined():
    with pytest.raises(UnderdeterminedError):
        nlls_fit(lambda p, x: p[0] * x, np.array([1.0]), np.array([2.0]), [(0.0, 10.0)], [[1.0]])


def test_nlls_fit_degenerate_bounds():
    with pytest.raises(InvalidArgumentError):
        nlls_fit(lambda p, x: p[0] * x, np.arange(3.0), np.arange(3.0), [(1.0, 1.0)], [[1.0]])


def test_nlls_fit_all_starts_diverge():
    with pytest.raises(ConvergenceError):
        nlls_fit(lambda p, x: np.full(x.shape, np.nan), np.arange(3.0), np.arange(3.0), [(0.0, 1.0)], [[0.5]])


def test_compute_to_loss_jacobian_matches_central_differences():
    theta = np.array([1.5, math.log(2e7), math.log(4e8), 0.34, 0.28])
    log_n = np.log([1e8, 1e9, 1e10, 3e8])
    log_d = np.log([1e9, 1e10, 1e11, 5e11])
    inputs = np.stack([log_n, log_d])
    analytic = compute_to_loss_jacobian(theta, inputs)
    numeric = _central_difference(compute_to_loss_curve, theta, inputs)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_loss_to_loss_jacobian_matches_central_differences():
    params = np.array([0.8, 1.3])
    lx = np.array([1.6, 2.0, 2.7, 3.5])
    analytic = loss_to_loss_jacobian(params, lx, 1.5)
    numeric = _central_difference(lambda p, x: loss_to_loss_curve(p, x, 1.5, 2.0), params, lx)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_fit_compute_to_loss_recovers_noiseless_law():
    world = wide_world(seeds=(0,))
    group = _single_group(generate(world, rng_seed=0, threads=1))
    law = fit_compute_to_loss(group, "train")
    truth = world.train_law["train"]
    assert not law.fallback_used
    assert law.n_points == 180
    assert law.e_irreducible == pytest.approx(truth.e, rel=1e-3)
    assert law.a_coef == pytest.approx(truth.a, rel=1e-3)
    assert law.b_coef == pytest.approx(truth.b, rel=1e-3)
    assert law.alpha == pytest.approx(truth.alpha, rel=1e-3)
    assert law.beta == pytest.approx(truth.beta, rel=1e-3)


def test_fitted_compute_to_loss_decreases_with_compute():
    group = _single_group(generate(wide_world(seeds=(0,)), rng_seed=0, threads=1))
    law = fit_compute_to_loss(group, "train")
    n = np.geomspace(6e7, 1e10, 30)
    losses = law.predict(n, 20 * n)
    assert np.all(np.diff(losses) < 0)
    assert np.all(losses > law.e_irreducible)


def test_fit_compute_to_loss_rejects_plateau():
    records = [
        make_record({"train": 3.0}, params_n=n, tokens_d=d)
        for n in (100, 200, 400)
        for d in (1000, 4000)
    ]
    group = _single_group(RecordSet.build(records, source="memory"))
    with pytest.raises(UnderdeterminedError):
        fit_compute_to_loss(group, "train")


def test_fit_compute_to_loss_needs_six_points():
    records = [make_record({"train": 3.0 - i / 10}, params_n=100 * (i + 1), tokens_d=1000 * (i + 1)) for i in range(5)]
    group = _single_group(RecordSet.build(records, source="memory"))
    with pytest.raises(UnderdeterminedError):
        fit_compute_to_loss(group, "train")


def test_single_n_falls_back_to_minimum_loss():
    records = [
        make_record({"train": value}, params_n=1000, tokens_d=d)
        for value, d in zip((3.2, 2.9, 3.0), (100, 200, 300))
    ]
    group = _single_group(RecordSet.build(records, source="memory"))
    with pytest.raises(InsufficientVariationError):
        fit_compute_to_loss(group, "train")
    assert estimate_irreducible_fallback(group, "train") == 2.9
    law = fit_irreducible(group, "train")
    assert law.fallback_used
    assert law.e_irreducible == 2.9
    assert law.alpha is None
    assert law.sse == pytest.approx(0.3**2 + 0.1**2)
    with pytest.raises(InvalidCompositionError):
        law.predict(1000, 100)


def test_fallback_single_record():
    group = _single_group(RecordSet.build([make_record({"x": 4.4})], source="memory"))
    assert estimate_irreducible_fallback(group, "x") == 4.4


def test_fallback_on_published_c4_column(evals_path):
    groups = [g for g in group_by_config(load_records(evals_path)) if g.config.pretrain_data == "FW-Edu"]
    assert len(groups) == 2
    assert [estimate_irreducible_fallback(g, "C4") for g in groups] == [3.66, 3.66]


def test_loss_to_loss_identity_line():
    xs = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
    law = fit_loss_to_loss(pairs_group(xs, xs), "train", "test", 0.0, 0.0)
    assert law.k_coef == pytest.approx(1.0, rel=1e-8)
    assert law.kappa == pytest.approx(1.0, rel=1e-8)
    assert law.r_squared == pytest.approx(1.0, abs=1e-12)
    assert law.law_id == "l2l:FW-Edu/Llama/tiktoken:train->test"


def test_loss_to_loss_noiseless_recovery():
    rng = np.random.default_rng(7)
    lx = rng.uniform(1.6, 3.5, size=400)
    ly = 0.8 * (lx - 1.5) ** 1.3 + 2.0
    law = fit_loss_to_loss(pairs_group(lx, ly), "train", "test", 1.5, 2.0)
    assert law.k_coef == pytest.approx(0.8, rel=1e-4)
    assert law.kappa == pytest.approx(1.3, rel=1e-4)
    assert law.r_squared >= 0.9999
    assert law.n_points == 400


def test_loss_to_loss_noisy_recovery_over_seeds():
    k_errors, kappa_errors = [], []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        clean_x = rng.uniform(1.6, 3.5, size=500)
        clean_y = 0.8 * (clean_x - 1.5) ** 1.3 + 2.0
        lx = clean_x + rng.normal(0.0, 0.01, size=500)
        ly = clean_y + rng.normal(0.0, 0.01, size=500)
        law = fit_loss_to_loss(pairs_group(lx, ly), "train", "test", 1.5, 2.0)
        k_errors.append(abs(law.k_coef / 0.8 - 1))
        kappa_errors.append(abs(law.kappa / 1.3 - 1))
    assert np.median(k_errors) <= 0.05
    assert np.median(kappa_errors) <= 0.05


def test_loss_to_loss_needs_three_points():
    with pytest.raises(UnderdeterminedError):
        fit_loss_to_loss(pairs_group([1.0, 2.0], [1.0, 2.0]), "train", "test", 0.0, 0.0)


def test_loss_to_loss_rejects_floor_above_data():
    xs = [1.0, 2.0, 3.0]
    with pytest.raises(InvalidArgumentError):
        fit_loss_to_loss(pairs_group(xs, xs), "train", "test", 1.5, 0.0)


def test_loss_to_loss_refuses_mixed_units():
    config = make_config()
    records = tuple(
        make_record(
            {"train": 1.0 + i, "test": 1.0 + i},
            params_n=10 + i,
            config=config,
            unit=LossUnit.BITS_PER_BYTE if i % 2 else LossUnit.NATS_PER_TOKEN,
        )
        for i in range(4)
    )
    with pytest.raises(UnitMismatchError):
        fit_loss_to_loss(ConfigGroup(config=config, records=records), "train", "test", 0.0, 0.0)


def test_r_squared_examples():
    perfect = make_l2l(k=2.0)
    assert r_squared(perfect, ([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])) == pytest.approx(1.0)
    mean_only = make_l2l(e_x=10.0, e_y=4.0)
    assert r_squared(mean_only, ([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])) == pytest.approx(0.0, abs=1e-12)
    value = r_squared(perfect, ([1.0, 2.0, 3.0], [2.0, 4.1, 5.9]))
    assert value == pytest.approx(1 - 0.02 / 7.62, rel=1e-9)
    assert value == pytest.approx(0.997375, abs=1e-6)


def test_r_squared_constant_targets():
    with pytest.raises(InvalidArgumentError):
        r_squared(make_l2l(), ([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]))


def test_predict_y_examples():
    identity = make_l2l()
    assert predict_y(identity, 1.5) == 1.5
    law = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0)
    assert predict_y(law, 1.5) == 2.0
    assert predict_y(law, 2.5) == pytest.approx(2.8)
    assert predict_y(law, 0.3) == 2.0
    values = predict_y(law, np.array([1.0, 2.5]))
    np.testing.assert_allclose(values, [2.0, 2.8])


def test_fit_groups_statuses_and_bundle():
    good = _single_group(generate(wide_world(seeds=(0,)), rng_seed=0, threads=1))
    single_n_config = make_config("C4")
    single_n = ConfigGroup(
        config=single_n_config,
        records=tuple(
            make_record({"train": 3.0 - 0.1 * i, "test": 4.0 - 0.15 * i}, params_n=1000, tokens_d=100 * (i + 1), config=single_n_config)
            for i in range(5)
        ),
    )
    few_config = make_config("Pile UC")
    few = ConfigGroup(
        config=few_config,
        records=tuple(
            make_record({"train": 3.0 - 0.1 * i, "test": 4.0 - 0.1 * i}, params_n=100 * (i + 1), tokens_d=100 * (i + 1), config=few_config)
            for i in range(3)
        ),
    )
    bundle, statuses = fit_groups([single_n, few, good], "train", ["test"], threads=2)

    assert [(s.config_label, s.status) for s in statuses] == [
        ("C4/Llama/tiktoken", "fallback"),
        ("Pile UC/Llama/tiktoken", "scatter_only"),
        ("FW-Edu/Llama/tiktoken", "fitted"),
    ]
    assert statuses[0].fallback_used
    assert statuses[1].reason
    assert statuses[2].r_squared == pytest.approx(1.0, abs=1e-6)
    assert len(bundle.loss_to_loss) == 2
    assert bundle.compute_law(good.config, "test") is not None
    assert bundle.pairs() == [("train", "test")]


def test_fit_groups_does_not_depend_on_threads():
    groups = group_by_config(generate(wide_world(noise_sigma=0.01, seeds=(0,)), rng_seed=3, threads=1))
    serial, _ = fit_groups(groups, "train", ["test"], threads=1)
    parallel, _ = fit_groups(groups, "train", ["test"], threads=4)
    assert serial.to_json() == parallel.to_json()


def test_law_bundle_round_trip(tmp_path):
    law = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0)
    bundle = LawBundle(loss_to_loss=[law])
    path = bundle.save(tmp_path / "laws.json")
    assert LawBundle.from_file(path) == bundle
    single = tmp_path / "one.json"
    single.write_text(law.model_dump_json(), encoding="utf-8")
    assert LawBundle.from_file(single).loss_to_loss == [law]
