import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipfield.raster import detect_markers
from slipfield.simulator import (
    FORCE_LEVELS,
    OUT_OF_CONTACT,
    SLIPPING,
    STUCK,
    GelModel,
    GelSimulator,
    Label,
    LoadScript,
    ObjectSpec,
    benchmark_suite,
    default_objects,
    frame_label,
    render,
    simulate,
)

MODEL = GelModel(noise_sigma=0.0)
DOME = ObjectSpec("dome", "disk", (8.0,), "dome", 0.8, 0.8, 1.0)


def push(amp, n=40, force=10.0, rotation=0.0):
    ramp = np.linspace(0.0, 1.0, n)
    return LoadScript(np.column_stack([ramp * amp, np.zeros(n)]), ramp * rotation, np.full(n, force))


def onset_frames(frames):
    """First frame each marker slips; -1 for never."""
    states = np.array([f.state for f in frames])
    slipped = states == SLIPPING
    first = np.where(slipped.any(axis=0), slipped.argmax(axis=0), -1)
    return first


def test_zero_motion_is_all_stuck():
    frames = simulate(MODEL, DOME, LoadScript.static(5))
    rest = MODEL.rest_grid()
    for f in frames:
        assert f.label == Label.NO_SLIP
        assert not (f.state == SLIPPING).any()
        np.testing.assert_array_equal(f.positions, rest)


def test_uniform_pressure_slips_all_at_once():
    obj = ObjectSpec("flat", "disk", (8.0,), "uniform", 0.5, 0.8, 1.0)
    frames = simulate(MODEL, obj, push(1.0))
    first = onset_frames(frames)
    contact = frames[0].in_contact
    assert len(set(first[contact])) == 1 and first[contact][0] > 0
    labels = [f.label for f in frames]
    assert Label.INCIPIENT_SLIP not in labels and Label.GROSS_SLIP in labels


def test_dome_slips_from_the_outside_in():
    frames = simulate(MODEL, DOME, push(1.2))
    first = onset_frames(frames)
    contact = frames[0].in_contact
    r = np.linalg.norm(MODEL.rest_grid() - DOME.center, axis=1)
    # analytic onset: first frame whose displacement reaches the marker's cap
    cap = DOME.mu * frames[0].pressure / MODEL.shear_stiffness
    amps = np.linspace(0.0, 1.2, 40)
    expected = np.array([np.argmax(amps > c) if (amps > c).any() else -1 for c in cap])
    np.testing.assert_array_equal(first[contact], expected[contact])
    # outer markers first, and an incipient window whose first slippers are outermost
    idx = np.flatnonzero(contact & (first >= 0))
    order = np.argsort(-r[idx])
    assert np.all(np.diff(first[idx][order]) >= 0)
    labels = [f.label for f in frames]
    assert Label.INCIPIENT_SLIP in labels
    k = labels.index(Label.INCIPIENT_SLIP)
    assert r[frames[k].slipping].max() == r[contact].max()


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.0, 2.0), st.floats(-0.05, 0.05), st.floats(2.0, 40.0),
    st.sampled_from(["dome", "uniform"]), st.integers(0, 1000),
)
def test_coulomb_cap_and_stuck_exactness(amp, rot, force, profile, seed):
    obj = ObjectSpec("o", "rectangle", (12.0, 9.0), profile, 0.6, 0.7, 1.0)
    script = push(amp, n=30, force=force, rotation=rot)
    sim = GelSimulator(GelModel(noise_sigma=0.02), obj, seed)
    ever_slipped = np.zeros(MODEL.n_markers, bool)
    for i in range(len(script)):
        g = sim.object_field(script.translation[i], script.rotation[i])
        f = sim.advance(script.translation[i], script.rotation[i], script.normal_force[i])
        k_u = MODEL.shear_stiffness * np.linalg.norm(f.displacement, axis=1)
        assert np.all(k_u <= obj.mu * f.pressure + 1e-9)
        ever_slipped |= f.state == SLIPPING
        fresh_stuck = (f.state == STUCK) & ~ever_slipped
        np.testing.assert_allclose(f.displacement[fresh_stuck], g[fresh_stuck], atol=1e-12)
        assert np.all(f.displacement[f.state == OUT_OF_CONTACT] == 0)


def test_stuck_markers_follow_the_object_increment():
    # after slipping, a re-stuck marker tracks object motion from where it slipped to
    sim = GelSimulator(MODEL, DOME)
    script = push(1.2)
    prev_u = prev_g = prev_state = None
    for i in range(len(script)):
        g = sim.object_field(script.translation[i], 0.0)
        f = sim.advance(script.translation[i], 0.0, 10.0)
        if prev_u is not None:
            stuck = (f.state == STUCK) & (prev_state == STUCK)
            np.testing.assert_allclose(f.displacement[stuck] - prev_u[stuck], (g - prev_g)[stuck], atol=1e-12)
        prev_u, prev_g, prev_state = f.displacement, g, f.state


def test_determinism():
    a = simulate(GelModel(), DOME, push(1.0), seed=7)
    b = simulate(GelModel(), DOME, push(1.0), seed=7)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.positions, fb.positions) and np.array_equal(fa.state, fb.state)
    c = simulate(GelModel(), DOME, push(1.0), seed=8)
    assert not np.array_equal(a[5].positions, c[5].positions)


def test_noise_on_outputs_only():
    noisy = simulate(GelModel(noise_sigma=0.05), DOME, push(1.0), seed=1)
    clean = simulate(MODEL, DOME, push(1.0), seed=1)
    for a, b in zip(noisy, clean):
        np.testing.assert_array_equal(a.displacement, b.displacement)
        np.testing.assert_array_equal(a.state, b.state)


def test_script_validation():
    with pytest.raises(ValueError):
        simulate(MODEL, DOME, push(10.0, n=5))
    with pytest.raises(ValueError):
        LoadScript(np.zeros((3, 2)), np.zeros(2), np.ones(3))
    s = push(1.0)
    t = LoadScript.from_dict(s.to_dict())
    np.testing.assert_array_equal(t.translation, s.translation)


def test_object_validation():
    with pytest.raises(ValueError):
        ObjectSpec("bad", "annulus", (5.0, 3.0))
    with pytest.raises(ValueError):
        ObjectSpec("bad", "disk", (5.0,), mu=0.0)
    with pytest.raises(ValueError):
        ObjectSpec("bad", "hexagon", (5.0,))
    with pytest.raises(ValueError):
        ObjectSpec("bad", "disk", (5.0,), texture_strength=1.5)


def test_frame_labels():
    assert frame_label(np.array([STUCK, STUCK, OUT_OF_CONTACT])) == Label.NO_SLIP
    assert frame_label(np.array([STUCK, SLIPPING, OUT_OF_CONTACT])) == Label.INCIPIENT_SLIP
    assert frame_label(np.array([SLIPPING, SLIPPING, OUT_OF_CONTACT])) == Label.GROSS_SLIP


def test_dome_patch_grows_with_force():
    sim = GelSimulator(MODEL, DOME)
    areas = [sim.caps(f)[0].sum() for f in (5.0, 10.0, 30.0)]
    assert areas[0] < areas[1] < areas[2]


def test_textureless_render_has_flat_background():
    obj = ObjectSpec("smooth", "disk", (8.0,), "dome", 0.8, 0.8, 0.0)
    f = simulate(MODEL, obj, LoadScript.static(1))[0]
    img = render(f, MODEL, obj)
    far = np.ones(img.shape, bool)
    for u, v in MODEL.geometry.mm_to_px(f.positions):
        far[max(int(v) - 8, 0) : int(v) + 9, max(int(u) - 8, 0) : int(u) + 9] = False
    assert np.all(img[far] == MODEL.background)


def test_render_recovers_grid():
    f = simulate(GelModel(), DOME, LoadScript.static(1), seed=2)[0]
    img = render(f, GelModel(), DOME, seed=2)
    assert img.dtype == np.uint8 and img.shape == (480, 640)
    assert len(detect_markers(img, GelModel().geometry)) == 475


def test_suite_shape():
    trials = benchmark_suite(seed=0)
    assert len(trials) == 240
    objs = default_objects()
    assert len(objs) == 10 and len({o.shape for o in objs}) == 3
    mus = [o.mu for o in objs]
    tex = [o.texture_strength for o in objs]
    assert min(mus) >= 0.2 and max(mus) <= 1.2
    assert min(tex) >= 0.05 and max(tex) <= 1.0
    for o in objs:
        mine = [t for t in trials if t.object.name == o.name]
        assert len(mine) == 24
        assert sum(t.slip_expected for t in mine) == 18
        assert sum(t.ground_truth_slip for t in mine) == 18
    assert {t.force for t in trials} == set(FORCE_LEVELS)
    assert len({t.trial_id for t in trials}) == 240


def test_suite_is_seeded():
    a = [t.seed for t in benchmark_suite(seed=3)]
    b = [t.seed for t in benchmark_suite(seed=3)]
    assert a == b


def test_weak_object_loses_contact_markers_at_low_force():
    weak = min(default_objects(), key=lambda o: o.texture_strength)
    f = simulate(GelModel(), weak, LoadScript.static(1, force=FORCE_LEVELS[0]))[0]
    assert f.visible.sum() < 12
    strong = simulate(GelModel(), weak, LoadScript.static(1, force=FORCE_LEVELS[-1]))[0]
    assert strong.visible.sum() > f.visible.sum()
