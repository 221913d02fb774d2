import numpy as np
import pytest

from duorec.corpus import (
    Catalog,
    CatalogEntry,
    PairDataset,
    PairRecord,
    Session,
    SessionSet,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_session(sid, items, user="u0", channel="purchase"):
    return Session(session_id=sid, user_id=user, items=list(items), channel=channel)


def make_sessions(*item_lists, channel="purchase"):
    return SessionSet(sessions=[
        make_session(f"s{i}", items, user=f"u{i}", channel=channel)
        for i, items in enumerate(item_lists)
    ])


def make_pairs(*triples):
    """triples: (item_a, item_b, count) with optional pmi 4th element."""
    ds = PairDataset()
    for t in triples:
        a, b, count = t[:3]
        pmi = t[3] if len(t) > 3 else 0.0
        ds.add(PairRecord(item_a=a, item_b=b, count=count, pmi=pmi))
    return ds


def make_catalog(**taxonomies) -> Catalog:
    """make_catalog(item_id="a>b", ...) — taxonomy paths '>'-joined."""
    return {
        item: CatalogEntry(item_id=item, taxonomy=tuple(path.split(">")), title=item)
        for item, path in taxonomies.items()
    }


@pytest.fixture
def bedding_pairs():
    """Two mattresses sharing one bed sheet as co-purchase partner, plus a
    separate cluster of distractor pairs so rankings are non-trivial."""
    return make_pairs(
        ("mattress-queen", "sheet-bed", 40),
        ("mattress-twin", "sheet-bed", 40),
        ("lamp-a", "lamp-b", 25),
        ("desk-a", "desk-b", 25),
        ("rug-a", "rug-b", 25),
    )
