"""Free-space path loss conversion between RSSI and line-of-sight distance.

The standard FSPL relation for distance d in meters and frequency f in MHz:

    path_loss_db = 20*log10(d) + 20*log10(f) - 27.55

Edges in a topology carry measured RSSI; with a known transmit power the
path loss follows, and inverting the relation yields an estimated distance.
Assumes ideal free space; reflections and obstacles are out of scope.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FsplParams:
    frequency_mhz: float = 2400.0
    tx_power_dbm: float = 0.0

    def __post_init__(self):
        if self.frequency_mhz <= 0:
            raise ValueError("frequency must be positive")


def fspl_distance(rssi_dbm, params: FsplParams = FsplParams()):
    """Estimated distance in meters from a received signal strength.

    Accepts scalars or arrays.  Extreme RSSI values give extreme but finite
    distances; no clamping is applied.
    """
    path_loss = params.tx_power_dbm - np.asarray(rssi_dbm, dtype=np.float64)
    exponent = (path_loss + 27.55 - 20.0 * math.log10(params.frequency_mhz)) / 20.0
    d = np.power(10.0, exponent)
    return float(d) if np.isscalar(rssi_dbm) else d


def fspl_rssi(distance_m, params: FsplParams = FsplParams()):
    """RSSI in dBm that free-space propagation predicts at a given distance.

    Exact inverse of :func:`fspl_distance`; the topology generator uses it to
    synthesize edge RSSI from true inter-node distances.
    """
    d = np.asarray(distance_m, dtype=np.float64)
    path_loss = 20.0 * np.log10(d) + 20.0 * math.log10(params.frequency_mhz) - 27.55
    rssi = params.tx_power_dbm - path_loss
    return float(rssi) if np.isscalar(distance_m) else rssi
