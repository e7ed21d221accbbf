import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erglearn.demos import (
    DemoFormatError,
    DemoSet,
    Demonstration,
    default_demo_set,
    load_demo_set,
    load_demos,
    record,
    save_demos,
)


def make_demo(demo_id="d0", label="positive", system="cartpole", n=5, seed=0, **kw):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.01, 0.1, size=n))
    x = rng.normal(size=(n, 4))
    return Demonstration(id=demo_id, system=system, times=t, states=x, label=label, **kw)


class TestDemonstration:
    def test_duration(self):
        d = record([(0.0, np.zeros(4)), (0.02, np.ones(4))], "positive", "cartpole", "d")
        assert d.duration == pytest.approx(0.02)

    def test_time_regression_rejected(self):
        with pytest.raises(ValueError, match="regression"):
            record([(0.1, np.zeros(4)), (0.05, np.ones(4))], "positive", "cartpole", "d")

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            record([(0.0, np.zeros(4))], "positive", "cartpole", "d")

    def test_label_and_source_validated(self):
        with pytest.raises(ValueError):
            make_demo(label="maybe")
        with pytest.raises(ValueError):
            make_demo(source="oracle")

    def test_state_dim_validated(self):
        with pytest.raises(ValueError):
            Demonstration(
                id="d",
                system="planar",
                times=np.array([0.0, 0.1]),
                states=np.zeros((2, 3)),
                label="positive",
            )

    def test_weight_override(self):
        d = make_demo(weight_override=3.5)
        assert d.effective_length == 3.5
        assert make_demo().effective_length == make_demo().duration


class TestDemoSet:
    def test_mixed_systems_rejected(self):
        a = make_demo("a", system="cartpole")
        b = make_demo("b", system="planar")
        with pytest.raises(ValueError):
            default_demo_set([a, b])

    def test_label_partition_preserves_order(self):
        demos = [
            make_demo("a", "positive", seed=1),
            make_demo("b", "negative", seed=2),
            make_demo("c", "positive", seed=3),
        ]
        ds = default_demo_set(demos)
        merged = ds.split_merge_roundtrip()
        assert [d.id for d in merged.demos] == ["a", "b", "c"]
        assert len(ds.by_label("positive")) == 2
        assert len(ds.by_label("negative")) == 1

    def test_default_domain_from_system(self):
        ds = default_demo_set([make_demo(system="planar")])
        assert ds.projection == (0, 1)
        assert ds.domain.volume() == pytest.approx(1.0)


class TestSerialization:
    def test_roundtrip_three_demos(self, tmp_path):
        demos = [make_demo(f"d{i}", seed=i) for i in range(3)]
        demos[1] = make_demo("d1", "negative", seed=1, weight_override=2.0, meta={"seed": 1})
        path = tmp_path / "set.demos.jsonl"
        save_demos(path, demos)
        system, loaded = load_demos(path)
        assert system == "cartpole"
        assert len(loaded) == 3
        for a, b in zip(demos, loaded):
            assert a.id == b.id and a.label == b.label and a.source == b.source
            assert np.array_equal(a.times, b.times)
            assert np.array_equal(a.states, b.states)
            assert a.weight_override == b.weight_override
            assert a.meta == b.meta

    def test_bad_label_is_parse_error_with_line(self, tmp_path):
        path = tmp_path / "bad.demos.jsonl"
        save_demos(path, [make_demo()])
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace('"positive"', '"maybe"')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DemoFormatError) as err:
            load_demos(path)
        assert err.value.line == 2

    def test_unknown_system_tag(self, tmp_path):
        path = tmp_path / "bad.demos.jsonl"
        path.write_text(json.dumps({"version": 1, "system": "quadrotor", "state_dim": 4}) + "\n")
        with pytest.raises(DemoFormatError):
            load_demos(path)

    def test_dim_mismatch_in_header(self, tmp_path):
        path = tmp_path / "bad.demos.jsonl"
        path.write_text(json.dumps({"version": 1, "system": "planar", "state_dim": 7}) + "\n")
        with pytest.raises(DemoFormatError):
            load_demos(path)

    def test_header_fields(self, tmp_path):
        path = tmp_path / "set.demos.jsonl"
        save_demos(path, [make_demo(system="planar")])
        header = json.loads(path.read_text().splitlines()[0])
        assert header == {
            "version": 1,
            "system": "planar",
            "state_dim": 4,
            "state_names": ["x", "y", "x_dot", "y_dot"],
        }

    def test_load_demo_set_uses_defaults(self, tmp_path):
        path = tmp_path / "set.demos.jsonl"
        save_demos(path, [make_demo(system="cartpole")])
        ds = load_demo_set(path)
        assert ds.projection == (0, 1)
        assert ds.domain.lengths[0] == pytest.approx(2 * np.pi)


finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False, width=64
)


@st.composite
def demo_strategy(draw, system):
    n = draw(st.integers(min_value=2, max_value=12))
    gaps = draw(
        st.lists(
            st.floats(min_value=1e-4, max_value=10.0, allow_nan=False), min_size=n, max_size=n
        )
    )
    times = np.cumsum(np.array(gaps))
    states = np.array(
        draw(
            st.lists(
                st.lists(finite_floats, min_size=4, max_size=4), min_size=n, max_size=n
            )
        )
    )
    return Demonstration(
        id=draw(st.uuids()).hex,
        system=system,
        times=times,
        states=states,
        label=draw(st.sampled_from(["positive", "negative"])),
        source=draw(st.sampled_from(["human", "synthetic"])),
        weight_override=draw(st.one_of(st.none(), st.floats(min_value=0.1, max_value=100.0))),
    )


@st.composite
def demo_set_strategy(draw):
    system = draw(st.sampled_from(["cartpole", "planar"]))
    demos = draw(st.lists(demo_strategy(system), min_size=1, max_size=5))
    return system, demos


@settings(max_examples=100, deadline=None)
@given(demo_set_strategy())
def test_serialization_roundtrip_exact(tmp_path_factory, case):
    system, demos = case
    path = tmp_path_factory.mktemp("demos") / "case.demos.jsonl"
    save_demos(path, demos, system=system)
    loaded_system, loaded = load_demos(path)
    assert loaded_system == system
    assert len(loaded) == len(demos)
    for a, b in zip(demos, loaded):
        assert a.id == b.id and a.label == b.label and a.source == b.source
        assert np.array_equal(a.times, b.times)  # bit-for-bit
        assert np.array_equal(a.states, b.states)
        assert a.weight_override == b.weight_override
