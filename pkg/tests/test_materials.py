import io
import math

import numpy as np
import pytest

from errors import (DomainError, InputOutputError, MaterialFormatError, MonotonicityError, OutOfRangeError,
                    PassivityError)
from materials import (BUILTIN_MATERIALS, ConstantModel, DrudeModel, LorentzModel, LorentzOscillator,
                       MagneticPermeability, TabulatedModel, load_tabulated, parse_complex_pair, permittivity,
                       resolve_material, skin_depth, write_tabulated)
from physics import C


def test_constant_model_scalar_and_array():
    model = ConstantModel(eps_re=4.0, eps_im=1.0)
    assert permittivity(model, 1e14) == complex(4.0, 1.0)
    values = permittivity(model, np.array([1e13, 1e14]))
    assert values.shape == (2,)
    np.testing.assert_array_equal(values, [4 + 1j, 4 + 1j])


def test_drude_formula(gold):
    omega = 2e14
    expected = 1 - gold.plasma_frequency**2 / (omega**2 + 1j * gold.damping * omega)
    np.testing.assert_allclose(permittivity(gold, omega), expected, rtol=1e-14)


def test_lorentz_is_passive_and_resonant(sio2):
    omega = np.geomspace(1e13, 1e15, 200)
    eps = permittivity(sio2, omega)
    assert np.all(eps.imag >= 0)
    peak = omega[np.argmax(eps.imag)]
    assert 0.8e14 < peak < 0.92e14
    # reststrahlen band: negative real part just above the first resonance
    assert permittivity(sio2, 0.9e14).real < 0


def test_single_lorentz_oscillator_formula():
    osc = LorentzOscillator(strength=2.0, resonance=1e14, damping=1e12)
    model = LorentzModel(eps_inf=1.5, oscillators=(osc,))
    w = 0.7e14
    expected = 1.5 + 2.0 * 1e28 / (1e28 - w * w - 1j * 1e12 * w)
    np.testing.assert_allclose(permittivity(model, w), expected, rtol=1e-14)


def test_non_passive_models_are_rejected():
    with pytest.raises(PassivityError):
        ConstantModel(eps_re=2.0, eps_im=-0.1)
    with pytest.raises(PassivityError):
        MagneticPermeability(mu_re=1.0, mu_im=-0.5)


def test_frequency_must_be_positive(sio2):
    with pytest.raises(DomainError):
        permittivity(sio2, 0.0)


def test_load_tabulated_interpolates(material_csv):
    with material_csv.open("rb") as handle:
        model = load_tabulated(handle)
    assert isinstance(model, TabulatedModel)
    assert model.bounds == (1e12, 1e16)
    eps = permittivity(model, 0.5 * (1e12 + 1e14))
    np.testing.assert_allclose(eps, 3.5 + 1.0j)
    assert permittivity(model, 1e14) == 3.0 + 1.5j


def test_tabulated_does_not_extrapolate(material_csv):
    model = load_tabulated(material_csv.read_bytes())
    with pytest.raises(OutOfRangeError) as info:
        permittivity(model, 2e16)
    assert info.value.omega == 2e16
    assert info.value.upper == 1e16


def test_write_then_load_preserves_rows(material_csv):
    model = load_tabulated(material_csv.read_text())
    buffer = io.StringIO()
    write_tabulated(model, buffer)
    assert load_tabulated(buffer.getvalue()) == model


@pytest.mark.parametrize("body, error, line", [
    ("omega,eps\n1,2\n", MaterialFormatError, 1),
    ("omega_rad_s,eps_re,eps_im\n1e12,2.0\n", MaterialFormatError, 2),
    ("omega_rad_s,eps_re,eps_im\n1e12,abc,0.1\n", MaterialFormatError, 2),
    ("omega_rad_s,eps_re,eps_im\n1e12,2.0,0.1\n1e13,2.0,-0.1\n", PassivityError, 3),
    ("omega_rad_s,eps_re,eps_im\n1e13,2.0,0.1\n# note\n1e12,2.0,0.1\n", MonotonicityError, 4),
])
def test_malformed_files_name_the_line(body, error, line):
    with pytest.raises(error) as info:
        load_tabulated(body)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_single_row_is_rejected():
    with pytest.raises(MaterialFormatError):
        load_tabulated("omega_rad_s,eps_re,eps_im\n1e12,2.0,0.1\n")


def test_skin_depth():
    lossless = ConstantModel(eps_re=2.0)
    assert skin_depth(lossless, 1e14) == math.inf
    model = ConstantModel(eps_re=0.0, eps_im=8.0)
    # sqrt(8i) = 2 + 2i
    np.testing.assert_allclose(skin_depth(model, 1e14), C / (2.0 * 1e14))


def test_resolve_material(material_csv):
    assert resolve_material("gold-drude") is BUILTIN_MATERIALS["gold-drude"]
    assert resolve_material("constant:3.5,0.25").epsilon(1e14) == 3.5 + 0.25j
    assert isinstance(resolve_material(str(material_csv)), TabulatedModel)
    assert set(BUILTIN_MATERIALS) == {"vacuum", "sio2-like", "gold-drude"}


def test_resolve_material_errors(tmp_path):
    with pytest.raises(InputOutputError):
        resolve_material(str(tmp_path / "missing.csv"))
    with pytest.raises(DomainError):
        resolve_material("constant:abc")


def test_parse_complex_pair():
    assert parse_complex_pair("1.5, 0.2") == 1.5 + 0.2j
    assert parse_complex_pair("2") == 2 + 0j
    with pytest.raises(ValueError):
        parse_complex_pair("1,2,3")


def test_drude_rejects_negative_damping():
    with pytest.raises(ValueError):
        DrudeModel(plasma_frequency=1e16, damping=-1.0)
