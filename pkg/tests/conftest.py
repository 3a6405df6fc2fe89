from __future__ import annotations

import pytest

from soilnet.environment import EnvironmentModel
from soilnet.motesim import default_sensor_suite
from soilnet.registry import Mote, Patch, Registry, Site

T0 = 1_136_073_600  # 2006-01-01T00:00:00Z


def make_registry(mote_ids=("m1",), bias_step_ohms=0.0, drop_sensors=()):
    """Programmatic one-site, one-patch registry with the default five-sensor
    loadout per mote. drop_sensors lists (mote_id, sensor_type) to omit."""
    reg = Registry()
    reg.sites["s1"] = Site(site_id="s1", name="test site", latitude=39.0, longitude=-76.0)
    reg.patches["p1"] = Patch(patch_id="p1", site_id="s1",
                              reference_coords=(39.0, -76.0), extent_m=(20.0, 20.0))
    for i, mid in enumerate(mote_ids):
        reg.motes[mid] = Mote(mote_id=mid, patch_id="p1", offset_m=(2.0 * i, 1.0))
        for s in default_sensor_suite(mid, bias_ohms=bias_step_ohms * i).values():
            if (mid, s.sensor_type) in drop_sensors:
                continue
            reg.sensors[s.sensor_id] = s
    return reg


@pytest.fixture
def registry():
    return make_registry()


@pytest.fixture
def env():
    return EnvironmentModel(t0_utc_s=T0, rain_events=((T0 + 2 * 86_400 + 6 * 3600, 8.0),))
