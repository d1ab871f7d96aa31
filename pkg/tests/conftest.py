"""Shared fixtures: default experiment configuration and derived objects."""
import pytest

from sram_margin_lab.config import (
    default_config,
    make_design,
    ramp_config,
    sim_settings,
    variation_model,
)


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def settings(cfg):
    return sim_settings(cfg)


@pytest.fixture(scope="session")
def ramp(cfg):
    return ramp_config(cfg)


@pytest.fixture(scope="session")
def model(cfg):
    return variation_model(cfg)


@pytest.fixture(scope="session")
def cell_a(cfg):
    return make_design(cfg, "A")


@pytest.fixture(scope="session")
def cell_e(cfg):
    return make_design(cfg, "E")
