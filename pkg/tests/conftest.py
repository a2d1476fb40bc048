import pytest

from materials import GOLD_DRUDE, SIO2_LIKE, ConstantModel


@pytest.fixture
def sio2():
    return SIO2_LIKE


@pytest.fixture
def gold():
    return GOLD_DRUDE


@pytest.fixture
def lossy_dielectric():
    return ConstantModel(eps_re=4.0, eps_im=1.0)


@pytest.fixture
def material_csv(tmp_path):
    """A small valid tabulated material on disk."""
    path = tmp_path / "material.csv"
    path.write_text(
        "# test material\n"
        "omega_rad_s,eps_re,eps_im\n"
        "1e12,4.0,0.5\n"
        "1e14,3.0,1.5\n"
        "1e16,2.0,0.1\n",
        encoding="utf-8",
    )
    return path
