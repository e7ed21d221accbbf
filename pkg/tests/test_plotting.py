import numpy as np

from erglearn.baselines import scripted_planar
from erglearn.demos import default_demo_set
from erglearn.plotting import compare_figure, density_figure, rollout_figure
from erglearn.task_learning import FusionConfig, learn_task


def make_task():
    demos = [
        scripted_planar("clean", "positive", seed=0, duration=8.0),
        scripted_planar("clean", "negative", seed=500, duration=6.0),
    ]
    ds = default_demo_set(demos)
    return learn_task(ds, FusionConfig(order=6), mode="posneg"), demos


def test_density_figure_with_overlays(tmp_path):
    task, demos = make_task()
    trace = np.stack([np.linspace(0.1, 0.9, 50), np.linspace(0.2, 0.8, 50)], axis=1)
    path = density_figure(
        tmp_path / "density.png", task, resolution=32, demos=demos,
        trajectory=trace, system="planar",
    )
    assert path.exists() if hasattr(path, "exists") else (tmp_path / "density.png").exists()
    assert (tmp_path / "density.png").stat().st_size > 1000


def test_density_figure_clipped(tmp_path):
    task, _ = make_task()
    density_figure(tmp_path / "clipped.png", task, resolution=16, clip=True)
    assert (tmp_path / "clipped.png").stat().st_size > 1000


def test_rollout_figure_cartpole(tmp_path):
    t = np.linspace(0, 10, 500)
    states = np.stack([np.sin(t), np.cos(t), t, np.ones_like(t)], axis=1)
    mask = np.abs(states[:, 0]) < 0.4
    rollout_figure(
        tmp_path / "roll.png", t, states, "cartpole",
        eps_running=np.exp(-0.1 * t), success_mask=mask, title="demo",
    )
    assert (tmp_path / "roll.png").stat().st_size > 1000


def test_rollout_figure_planar_no_eps(tmp_path):
    t = np.linspace(0, 5, 100)
    states = np.stack([t / 5, 1 - t / 5, np.zeros_like(t), np.zeros_like(t)], axis=1)
    rollout_figure(tmp_path / "planar.png", t, states, "planar")
    assert (tmp_path / "planar.png").stat().st_size > 1000


def test_compare_figure(tmp_path):
    per_mode = {
        "posonly": [0.0, 0.4, 0.8, 0.8],
        "negonly": [0.6, 0.7, 0.72],
        "posneg": [0.92, 0.96, 1.0],
    }
    compare_figure(tmp_path / "cmp.png", per_mode, "coverage", title="modes")
    assert (tmp_path / "cmp.png").stat().st_size > 1000
