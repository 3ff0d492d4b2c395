import json
from pathlib import Path

import numpy as np
import pytest

from blochstrip.bands import BasisProvider
from blochstrip.cell import build_coefficient_field, free_space_field
from blochstrip.config import load_config
from blochstrip.solve import incident_field, residual_check, solve_scattering

CONFIG_DIR = Path(__file__).resolve().parent.parent / "src" / "blochstrip" / "configs"


def config_path(name: str) -> Path:
    return CONFIG_DIR / f"{name}.json"


@pytest.fixture(scope="session")
def rod_field():
    """The canonical strong rod of the geometry examples (contrast 12)."""
    return build_coefficient_field({"type": "rod", "center": [0.5, 0.5], "radius": 0.3,
                                    "a_inside": 1 / 12, "a_outside": 1.0, "mollify": 0.05})


@pytest.fixture(scope="session")
def default_rod():
    """The shipped default crystal (contrast 4, wide mollification)."""
    return build_coefficient_field({"type": "rod", "center": [0.5, 0.5], "radius": 0.3,
                                    "a_inside": 0.25, "a_outside": 1.0, "mollify": 0.15})


@pytest.fixture(scope="session")
def rod_provider(rod_field):
    return BasisProvider(rod_field, 6)


@pytest.fixture(scope="session")
def default_provider(default_rod):
    return BasisProvider(default_rod, 6)


@pytest.fixture(scope="session")
def free_provider():
    return BasisProvider(free_space_field(), 6)


@pytest.fixture(scope="session")
def laminate_config():
    return load_config(config_path("negative_refraction"))


@pytest.fixture(scope="session")
def rod_config():
    return load_config(config_path("rod_transmission"))


@pytest.fixture(scope="session")
def support_config():
    return load_config(config_path("support_band_edge"))


@pytest.fixture(scope="session")
def rod_run(rod_config):
    """Solver solution of the shipped rod transmission configuration."""
    scfg = rod_config.scatter_config()
    u = solve_scattering(scfg, rod_config.field)
    inc = incident_field(scfg)
    res = residual_check(u, scfg, rod_config.field)
    provider = BasisProvider(rod_config.field, rod_config.cutoff)
    return {"cfg": rod_config, "scfg": scfg, "u": u, "inc": inc, "residual": res,
            "provider": provider}


@pytest.fixture(scope="session")
def rod_run_wide(rod_config):
    """Same rod problem solved with a wider sponge (independent truncation)."""
    from blochstrip.solve import ScatterConfig, SpongeSpec
    base = rod_config.scatter_config()
    scfg = ScatterConfig(omega=base.omega, k=base.k, epsilon=base.epsilon, K=base.K,
                         x_lo=base.x_lo - 8, x_hi=base.x_hi + 8, n_cell=base.n_cell,
                         sponge=SpongeSpec(width=base.sponge.width + 8,
                                           delta_max=base.sponge.delta_max,
                                           exponent=base.sponge.exponent),
                         tfsf_plane=base.tfsf_plane)
    u = solve_scattering(scfg, rod_config.field)
    return {"cfg": rod_config, "scfg": scfg, "u": u}


@pytest.fixture(scope="session")
def laminate_run(laminate_config):
    scfg = laminate_config.scatter_config()
    u = solve_scattering(scfg, laminate_config.field)
    inc = incident_field(scfg)
    provider = BasisProvider(laminate_config.field, laminate_config.cutoff)
    return {"cfg": laminate_config, "scfg": scfg, "u": u, "inc": inc, "provider": provider}


@pytest.fixture(scope="session")
def support_run(support_config):
    scfg = support_config.scatter_config()
    u = solve_scattering(scfg, support_config.field)
    provider = BasisProvider(support_config.field, support_config.cutoff)
    return {"cfg": support_config, "scfg": scfg, "u": u, "provider": provider}


@pytest.fixture(scope="session")
def negref_artifacts(tmp_path_factory):
    """Artifacts of the full CLI pipeline on the negative-refraction config."""
    from blochstrip.cli import main
    out = tmp_path_factory.mktemp("negref_artifacts")
    rc = main(["full", "--config", str(config_path("negative_refraction")),
               "--out", str(out)])
    assert rc == 0
    # the secondary renderer also wants band and contour artifacts of this run
    assert main(["bands", "--config", str(config_path("negative_refraction")),
                 "--out", str(out)]) == 0
    assert main(["isofreq", "--config", str(config_path("negative_refraction")),
                 "--out", str(out)]) == 0
    return out


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
