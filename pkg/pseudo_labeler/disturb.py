"""
Label disturbance for sensitivity studies.

Every scalar of a selected group is scaled by (1 + u) with u drawn from
U[-p/2, p/2). Each (record, group) pair draws from its own stream keyed by
(seed, stream_key, record index, group), so the factors do not depend on
which other groups or records are disturbed.
"""
from dataclasses import replace

from .config import DisturbConfig
from .random import Random

GROUP_FIELDS = {
    "location": ("loc", 3),
    "dimension": ("dims", 3),
    "orientation": ("ry", 1),
}


def disturbance_factors(p, size, rng):
    """Multiplicative factors 1 + u, u ~ U[-p/2, p/2)"""
    return 1.0 + rng.uniform(-p / 2, p / 2, size)


def scale_group(record, group, factors):
    """Record with the components of ``group`` multiplied by ``factors``"""
    name, _ = GROUP_FIELDS[group]
    if name == "ry":
        return replace(record, ry=float(record.ry * factors[0]))
    values = tuple(float(v * f) for v, f in zip(getattr(record, name), factors))
    return replace(record, **{name: values})


def record_stream(seed, stream_key, index, group):
    key = (index, group) if stream_key is None else (stream_key, index, group)
    return Random(seed, key)


def disturb_labels(records, cfg=None, stream_key=None):
    """Disturbed copies of ``records``; DontCare lines pass through.

    ``alpha`` and the 2D box are left alone. With p == 0 the input
    records are returned unchanged.
    """
    cfg = cfg or DisturbConfig()
    records = list(records)
    if cfg.p == 0:
        return records
    out = []
    for index, rec in enumerate(records):
        if rec.is_dont_care:
            out.append(rec)
            continue
        for group in sorted(cfg.groups):
            _, size = GROUP_FIELDS[group]
            rng = record_stream(cfg.seed, stream_key, index, group)
            rec = scale_group(rec, group, disturbance_factors(cfg.p, size, rng))
        out.append(rec)
    return out

