import numpy as np
import pytest

from snnball.deploy import (
    DeviceProfile,
    builtin_profile,
    load_profile,
    quantize_weights,
    report_gap,
    validate,
)
from snnball.network import (
    IF_MULTISPIKE,
    LIF_SINGLE,
    NetworkSpec,
    build_profile,
    conv,
    init_weights,
    linear,
    maxpool,
)


def with_extra_pool(spec):
    """metatf stack with a second pooling layer wedged after conv2."""
    layers = list(spec.layers)
    layers.insert(3, maxpool())
    # stride-2 conv2 plus a pool collapses too far; relax conv2 stride
    layers[2] = conv(4, (3, 3), stride=1, bias=True, batchnorm=True,
                     activation="quantized_relu")
    return NetworkSpec(
        layers=tuple(layers), steps=spec.steps, profile_name="custom",
        act_bits=spec.act_bits,
    )


class TestBuiltinProfiles:
    def test_all_three_load(self):
        for name in ("dynapcnn_like", "akida_like", "loihi2_like"):
            p = builtin_profile(name)
            assert p.name == name
            assert p.weight_bits >= 1

    def test_unknown_builtin_rejected(self):
        with pytest.raises(ValueError, match="unknown device profile"):
            builtin_profile("gpu_like")

    def test_profile_file_loading(self, tmp_path):
        path = tmp_path / "dev.profile"
        path.write_text(
            "# custom test device\n"
            "name toy\nmax_neurons_per_layer 100\n"
            "allowed_layer_kinds conv2d,linear\npooling_allowed none\n"
            "bias_supported 1\nweight_bits 6\nneuron_modes_supported lif_single\n"
        )
        p = load_profile(path)
        assert p.name == "toy" and p.weight_bits == 6
        assert p.allowed_layer_kinds == frozenset({"conv2d", "linear"})


class TestValidate:
    def test_sinabs_fits_dynapcnn(self):
        report = validate(build_profile("sinabs_like"), builtin_profile("dynapcnn_like"))
        assert report.passed, report.violations

    def test_metatf_fits_akida(self):
        report = validate(build_profile("metatf_like"), builtin_profile("akida_like"))
        assert report.passed, report.violations

    def test_lava_fits_loihi2(self):
        report = validate(build_profile("lava_like"), builtin_profile("loihi2_like"))
        assert report.passed, report.violations

    def test_sinabs_vs_loihi2_exactly_two_pooling_violations(self):
        spec = build_profile("sinabs_like")
        report = validate(spec, builtin_profile("loihi2_like"))
        assert not report.passed
        assert len(report.violations) == 2
        pool_indices = [i for i, l in enumerate(spec.layers) if l.kind == "avgpool"]
        assert [v.layer for v in report.violations] == pool_indices
        assert all(v.constraint == "pooling" for v in report.violations)

    def test_metatf_with_extra_pool_fails_akida_at_second_pool(self):
        spec = with_extra_pool(build_profile("metatf_like"))
        report = validate(spec, builtin_profile("akida_like"))
        assert not report.passed
        assert len(report.violations) == 1
        v = report.violations[0]
        assert v.constraint == "pooling"
        assert v.layer == 3  # the wedged-in second pooling layer
        # sanity: the original stack still passes
        assert validate(build_profile("metatf_like"), builtin_profile("akida_like")).passed

    def test_neuron_budget_violation(self):
        spec = NetworkSpec(
            layers=(conv(32, (3, 3), activation=IF_MULTISPIKE),
                    linear(128, activation=IF_MULTISPIKE)),
            steps=4,
        )
        report = validate(spec, builtin_profile("dynapcnn_like"))
        assert any(v.constraint == "neurons" for v in report.violations)

    def test_layer_kind_violation(self):
        profile = DeviceProfile(
            name="convless", max_neurons_per_layer=10**6,
            allowed_layer_kinds=frozenset({"linear"}), pooling_allowed="all",
            bias_supported=True, weight_bits=8,
            neuron_modes_supported=frozenset({IF_MULTISPIKE}),
        )
        report = validate(build_profile("sinabs_like"), profile)
        assert any(v.constraint == "layer-kind" for v in report.violations)

    def test_bias_violation(self):
        spec = NetworkSpec(
            layers=(linear(128, bias=True, activation=IF_MULTISPIKE),),
            steps=4,
        )
        report = validate(spec, builtin_profile("dynapcnn_like"))
        assert any(v.constraint == "bias" for v in report.violations)

    def test_neuron_mode_violation(self):
        report = validate(build_profile("lava_like"), builtin_profile("dynapcnn_like"))
        assert any(v.constraint == "neuron-mode" for v in report.violations)

    def test_weight_grid_violation_and_fix(self):
        spec = build_profile("sinabs_like")
        weights = init_weights(spec, seed=0)
        profile = builtin_profile("dynapcnn_like")
        report = validate(spec, profile, weights=weights)
        assert any(v.constraint == "weight-bits" for v in report.violations)
        quantized, _ = quantize_weights(weights, profile.weight_bits)
        assert validate(spec, profile, weights=quantized).passed

    def test_every_constraint_field_has_a_failing_fixture(self):
        # the six profile fields, each exercised above; aggregated here
        seen = set()
        spec = build_profile("sinabs_like")
        seen.update(v.constraint for v in validate(spec, builtin_profile("loihi2_like")).violations)
        seen.update(
            v.constraint
            for v in validate(spec, builtin_profile("dynapcnn_like"),
                              weights=init_weights(spec)).violations
        )
        big = NetworkSpec(
            layers=(conv(64, (3, 3), bias=True, activation=LIF_SINGLE),
                    linear(128, activation=IF_MULTISPIKE)),
            steps=4,
        )
        seen.update(v.constraint for v in validate(big, builtin_profile("dynapcnn_like")).violations)
        no_linear = DeviceProfile(
            name="x", max_neurons_per_layer=10**6,
            allowed_layer_kinds=frozenset({"conv2d"}), pooling_allowed="all",
            bias_supported=True, weight_bits=8,
            neuron_modes_supported=frozenset({IF_MULTISPIKE}),
        )
        seen.update(v.constraint for v in validate(spec, no_linear).violations)
        assert {"pooling", "layer-kind", "neurons", "bias", "neuron-mode", "weight-bits"} <= seen


class TestQuantizeWeights:
    def test_already_quantized_has_zero_error(self):
        spec = build_profile("sinabs_like")
        w = init_weights(spec, seed=1)
        q1, _ = quantize_weights(w, 5)
        q2, errs = quantize_weights(q1, 5)
        for a, b in zip(q1.layers, q2.layers):
            if a.weight is not None:
                assert np.array_equal(a.weight, b.weight)
        assert all(e in (None, 0.0) for e in errs)

    def test_worked_example_three_bits(self):
        # layer [-1, 0.5], bits=3: scale 1/3; 0.5 -> 2/3; max error 1/6
        from snnball.network import LayerWeights, Weights

        w = Weights(layers=[LayerWeights(weight=np.array([[-1.0, 0.5]]))])
        q, errs = quantize_weights(w, 3)
        np.testing.assert_allclose(q.layers[0].weight, [[-1.0, 2.0 / 3.0]], atol=1e-15)
        assert errs[0] == pytest.approx(1.0 / 6.0)

    def test_error_bounded_by_half_scale(self):
        rng = np.random.default_rng(2)
        from snnball.network import LayerWeights, Weights

        for bits in (2, 3, 4, 8):
            arr = rng.normal(0, 1, (6, 7))
            w = Weights(layers=[LayerWeights(weight=arr)])
            q, errs = quantize_weights(w, bits)
            scale = np.abs(arr).max() / (2 ** (bits - 1) - 1)
            assert errs[0] <= scale / 2 + 1e-15
            assert np.abs(arr - q.layers[0].weight).max() <= scale / 2 + 1e-15

    def test_all_zero_layer_uses_sentinel_scale(self):
        from snnball.network import LayerWeights, Weights

        w = Weights(layers=[LayerWeights(weight=np.zeros((3, 3)))])
        q, errs = quantize_weights(w, 4)
        assert np.array_equal(q.layers[0].weight, np.zeros((3, 3)))
        assert errs[0] == 0.0

    def test_bits_below_two_rejected(self):
        with pytest.raises(ValueError):
            quantize_weights(init_weights(build_profile("sinabs_like")), 1)


class TestReportGap:
    def _fixture(self):
        spec = build_profile("sinabs_like")
        w = init_weights(spec, seed=3)
        w.layers[0].weight *= 10  # ensure spiking
        return spec, w

    def test_large_bits_vanishing_gap(self, tiny_samples):
        spec, w = self._fixture()
        base, quant = report_gap(spec, w, tiny_samples[:10], bits=24)
        assert abs(base.mean - quant.mean) <= 1e-6

    def test_deterministic(self, tiny_samples):
        spec, w = self._fixture()
        a = report_gap(spec, w, tiny_samples[:10], bits=4)
        b = report_gap(spec, w, tiny_samples[:10], bits=4)
        assert a == b
