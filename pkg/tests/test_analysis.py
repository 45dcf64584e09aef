import numpy as np
import pytest
from pydantic import ValidationError

from src.analysis import (
    InterventionMatrix,
    ReportOptions,
    area_between,
    build_report,
    check_composable,
    curve_samples,
    forecast_downstream,
    intervention_matrix,
    subsample_points,
    write_report,
)
from src.core.errors import InvalidArgumentError, InvalidCompositionError, UnitMismatchError
from src.core.types import LossUnit
from src.fitlaw import ComputeToLossLaw, LawBundle, fit_two_stage, predict_y
from src.ingest import group_by_config
from src.synth import generate

from tests.conftest import acceptance_world, make_config, make_l2l, pairs_group


def _trapezoid(law_a, law_b, lo, hi, points=10**6):
    xs = np.linspace(lo, hi, points + 1)
    ys = np.abs(predict_y(law_a, xs) - predict_y(law_b, xs))
    h = (hi - lo) / points
    return float(h * (ys.sum() - 0.5 * (ys[0] + ys[-1])))


def _random_law(rng, name):
    return make_l2l(
        k=float(rng.uniform(0.2, 2.0)),
        kappa=float(rng.uniform(0.5, 2.0)),
        e_x=float(rng.uniform(0.0, 1.5)),
        e_y=float(rng.uniform(0.0, 2.0)),
        config=make_config(name),
    )


def test_area_between_identical_laws_is_zero():
    law = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0)
    assert area_between(law, law) == 0.0
    assert area_between(law, make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0, config=make_config("C4"))) == 0.0


def test_area_between_constant_offset():
    base = make_l2l()
    shifted = make_l2l(e_y=0.5)
    assert area_between(base, shifted, (0.0, 2.0)) == pytest.approx(1.0, abs=1e-8)


def test_area_between_line_and_parabola_matches_trapezoid():
    line = make_l2l(kappa=1.0)
    parabola = make_l2l(kappa=2.0)
    area = area_between(line, parabola, (0.0, 2.0))
    assert area == pytest.approx(1.0, abs=1e-6)
    assert abs(area - _trapezoid(line, parabola, 0.0, 2.0)) <= 1e-6


def test_area_between_handles_kinks_inside_interval():
    a = make_l2l(k=1.2, kappa=1.5, e_x=0.7, e_y=0.4)
    b = make_l2l(k=0.6, kappa=0.8, e_x=1.1, e_y=0.6)
    assert area_between(a, b) == pytest.approx(_trapezoid(a, b, 0.0, 2.0), abs=1e-6)


def test_area_between_is_symmetric():
    a = make_l2l(k=1.2, kappa=1.5, e_x=0.7, e_y=0.4)
    b = make_l2l(k=0.6, kappa=0.8, e_x=1.1, e_y=0.6)
    assert area_between(a, b) == pytest.approx(area_between(b, a), abs=1e-9)


def test_area_between_rejects_unit_mismatch_and_empty_interval():
    bpb = make_l2l()
    nats = make_l2l(unit=LossUnit.NATS_PER_TOKEN)
    with pytest.raises(UnitMismatchError):
        area_between(bpb, nats)
    with pytest.raises(InvalidArgumentError):
        area_between(bpb, make_l2l(e_y=0.5), (2.0, 2.0))


def test_area_between_allows_different_datasets():
    a = make_l2l()
    b = make_l2l(e_y=0.5, y_dataset="other")
    assert area_between(a, b) == pytest.approx(1.0, abs=1e-8)


def test_matrix_of_identical_laws_is_zero():
    law = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0)
    matrix = intervention_matrix([("a", law), ("b", law)])
    assert matrix.areas == [[0.0, 0.0], [0.0, 0.0]]


def test_matrix_line_and_parabola():
    matrix = intervention_matrix([("line", make_l2l(kappa=1.0)), ("parabola", make_l2l(kappa=2.0))])
    assert matrix.area("line", "parabola") == pytest.approx(1.0, abs=1e-6)
    assert matrix.interval == (0.0, 2.0)
    assert matrix.unit == LossUnit.BITS_PER_BYTE


def test_matrix_symmetry_zero_diagonal_and_triangle_inequality():
    rng = np.random.default_rng(2024)
    for trial in range(10):
        size = int(rng.integers(2, 6))
        laws = [(f"c{i}", _random_law(rng, f"c{i}")) for i in range(size)]
        matrix = intervention_matrix(laws, threads=3)
        areas = np.array(matrix.areas)
        assert np.array_equal(areas, areas.T)
        assert np.all(np.diag(areas) == 0.0)
        assert np.all(areas >= 0.0)
        for i in range(size):
            for j in range(size):
                for k in range(size):
                    assert areas[i, k] <= areas[i, j] + areas[j, k] + 1e-7


def test_matrix_does_not_depend_on_threads():
    rng = np.random.default_rng(5)
    laws = [(f"c{i}", _random_law(rng, f"c{i}")) for i in range(5)]
    assert intervention_matrix(laws, threads=1) == intervention_matrix(laws, threads=4)


def test_matrix_argument_errors():
    law = make_l2l()
    with pytest.raises(InvalidArgumentError):
        intervention_matrix([("a", law)])
    with pytest.raises(InvalidArgumentError):
        intervention_matrix([("a", law), ("a", law)])
    with pytest.raises(UnitMismatchError):
        intervention_matrix([("a", law), ("b", make_l2l(unit=LossUnit.NATS_PER_TOKEN))])


def test_matrix_validation():
    with pytest.raises(ValidationError):
        InterventionMatrix(
            labels=["a", "b"], areas=[[0.0, 1.0], [2.0, 0.0]],
            x_dataset="train", y_dataset="test", unit=LossUnit.BITS_PER_BYTE,
        )
    with pytest.raises(ValidationError):
        InterventionMatrix(
            labels=["a", "b"], areas=[[0.5, 1.0], [1.0, 0.0]],
            x_dataset="train", y_dataset="test", unit=LossUnit.BITS_PER_BYTE,
        )


def test_matrix_tables():
    matrix = intervention_matrix([("a", make_l2l()), ("b", make_l2l(e_y=0.5))])
    header, rows = matrix.table_rows()
    assert header == ["", "a", "b"]
    assert rows[0][0] == "a"
    assert rows[0][2] == pytest.approx(1.0, abs=1e-8)
    long_header, long_rows = matrix.long_rows()
    assert long_header == ["row", "column", "area"]
    assert [row[:2] for row in long_rows] == [["a", "a"], ["a", "b"], ["b", "a"], ["b", "b"]]


def test_forecast_reaches_floors_at_huge_compute():
    world = acceptance_world()
    forecast = forecast_downstream(
        world.true_compute_to_loss("train"), world.true_loss_to_loss("test"), 10**18, 10**18
    )
    assert forecast.predicted_train_loss == pytest.approx(2.0, abs=1e-3)
    assert forecast.predicted_test_loss == pytest.approx(2.5, abs=1e-3)
    assert forecast.laws_used == (
        "c2l:FW-Edu/Llama/tiktoken:train",
        "l2l:FW-Edu/Llama/tiktoken:train->test",
    )


def test_forecast_with_identity_coupling():
    world = acceptance_world()
    identity = make_l2l(e_x=2.0, e_y=2.0, unit=LossUnit.NATS_PER_TOKEN)
    forecast = forecast_downstream(world.true_compute_to_loss("train"), identity, 100_000_000, 2_000_000_000)
    assert forecast.predicted_test_loss == pytest.approx(forecast.predicted_train_loss, rel=1e-12)


def test_forecast_matches_implied_compute_to_test_law():
    world = acceptance_world()
    train_law = world.true_compute_to_loss("train")
    l2l = world.true_loss_to_loss("test")
    implied = world.true_compute_to_loss("test")
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(np.exp(rng.uniform(np.log(6e7), np.log(4e8))))
        d = int(np.exp(rng.uniform(np.log(1e8), np.log(8e9))))
        forecast = forecast_downstream(train_law, l2l, n, d)
        assert forecast.predicted_test_loss == pytest.approx(float(implied.predict(n, d)), abs=1e-9)


def _forecast_grid(train_law, l2l, n_values, d_values):
    train = np.empty((len(n_values), len(d_values)))
    test = np.empty_like(train)
    for i, n in enumerate(n_values):
        for j, d in enumerate(d_values):
            forecast = forecast_downstream(train_law, l2l, int(n), int(d))
            train[i, j] = forecast.predicted_train_loss
            test[i, j] = forecast.predicted_test_loss
    return train, test


@pytest.mark.parametrize("fitted", [False, True])
def test_forecast_never_rises_with_more_parameters_or_tokens(fitted):
    world = acceptance_world(seeds=(0,))
    if fitted:
        group = group_by_config(generate(world, rng_seed=0))[0]
        fit = fit_two_stage(group, "train", "test")
        train_law, l2l = fit.x_law, fit.loss_to_loss
    else:
        train_law, l2l = world.true_compute_to_loss("train"), world.true_loss_to_loss("test")
    n_values = np.geomspace(1e6, 1e12, 25)
    d_values = np.geomspace(1e7, 1e14, 25)
    for predictions in _forecast_grid(train_law, l2l, n_values, d_values):
        assert np.all(np.diff(predictions, axis=0) <= 1e-12)
        assert np.all(np.diff(predictions, axis=1) <= 1e-12)


def test_forecast_composition_errors():
    world = acceptance_world()
    train_law = world.true_compute_to_loss("train")
    l2l = world.true_loss_to_loss("test")
    fallback = ComputeToLossLaw(
        eval_dataset="train", config=train_law.config, unit=train_law.unit,
        e_irreducible=2.0, fallback_used=True, sse=0.0, n_points=3,
    )
    with pytest.raises(InvalidCompositionError):
        check_composable(fallback, l2l)
    with pytest.raises(InvalidCompositionError):
        forecast_downstream(train_law, l2l.model_copy(update={"x_dataset": "other"}), 10**8, 10**9)
    with pytest.raises(InvalidCompositionError):
        forecast_downstream(train_law, l2l.model_copy(update={"config": make_config("C4")}), 10**8, 10**9)
    with pytest.raises(InvalidCompositionError):
        forecast_downstream(train_law, l2l.model_copy(update={"unit": LossUnit.BITS_PER_BYTE}), 10**8, 10**9)


def test_curve_samples_are_even():
    xs, ys = curve_samples(make_l2l(), 0.0, 2.0, 5)
    np.testing.assert_allclose(xs, [0.0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(ys, xs)


def test_subsample_points():
    xs = np.arange(50.0)
    sx, sy = subsample_points((xs, 2 * xs), 10, seed=3)
    assert sx.size == 10
    assert np.all(np.diff(sx) > 0)
    np.testing.assert_array_equal(sy, 2 * sx)
    again, _ = subsample_points((xs, 2 * xs), 10, seed=3)
    np.testing.assert_array_equal(sx, again)
    kept, _ = subsample_points((xs, xs), 100)
    assert kept.size == 50
    assert subsample_points((xs, xs), None)[0].size == 50


def test_empty_report(tmp_path):
    report = build_report([], LawBundle())
    assert report.curves == []
    assert report.scatter == []
    assert report.matrices == []
    assert len(report.notes) == 2
    written = write_report(report, tmp_path)
    assert sorted(p.name for p in written) == ["compute_to_loss.csv", "loss_to_loss.csv", "report.json"]


def _report_fixture():
    rng = np.random.default_rng(0)
    lx = np.sort(rng.uniform(1.6, 3.5, size=50))
    ly = 0.8 * (lx - 1.5) ** 1.3 + 2.0
    fitted = pairs_group(lx, ly)
    bare = pairs_group(lx[:5], ly[:5] + 0.3, config=make_config("C4"))
    law = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.0, unit=LossUnit.NATS_PER_TOKEN)
    shifted = make_l2l(k=0.8, kappa=1.3, e_x=1.5, e_y=2.5, unit=LossUnit.NATS_PER_TOKEN, config=make_config("Pile UC"))
    bundle = LawBundle(loss_to_loss=[law, shifted])
    matrix = intervention_matrix([(law.config.label, law), (shifted.config.label, shifted)])
    return [fitted, bare], bundle, [matrix]


def test_report_subsample_and_statuses():
    groups, bundle, matrices = _report_fixture()
    report = build_report(groups, bundle, matrices, ReportOptions(subsample=10, seed=1))
    scatter = {s.config_label: s for s in report.scatter}
    assert scatter["FW-Edu/Llama/tiktoken"].status == "fitted"
    assert scatter["FW-Edu/Llama/tiktoken"].n_total == 50
    assert len(scatter["FW-Edu/Llama/tiktoken"].x) == 10
    assert scatter["C4/Llama/tiktoken"].status == "scatter_only"
    assert len(scatter["C4/Llama/tiktoken"].x) == 5
    assert len(report.notes) == 3
    assert report.matrices == matrices


def test_report_curves_cover_interval_and_observations():
    groups, bundle, matrices = _report_fixture()
    report = build_report(groups, bundle, matrices)
    curves = {c.config_label: c for c in report.curves}
    fitted = curves["FW-Edu/Llama/tiktoken"]
    assert len(fitted.x) == 200
    assert fitted.x[0] == 0.0
    assert fitted.x[-1] == pytest.approx(float(groups[0].loss_pairs("train", "test")[0].max()))
    assert curves["Pile UC/Llama/tiktoken"].x[-1] == 2.0


def test_write_report_is_byte_identical(tmp_path):
    groups, bundle, matrices = _report_fixture()
    first = write_report(build_report(groups, bundle, matrices, ReportOptions(subsample=10)), tmp_path / "a")
    second = write_report(build_report(groups, bundle, matrices, ReportOptions(subsample=10)), tmp_path / "b")
    names = sorted(str(p.relative_to(tmp_path / "a")) for p in first)
    assert names == sorted(str(p.relative_to(tmp_path / "b")) for p in second)
    assert "loss_to_loss__train__test.svg" in names
    assert "matrix__train__test.svg" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    svg = (tmp_path / "a" / "loss_to_loss__train__test.svg").read_text(encoding="utf-8")
    assert "<svg" in svg
