import numpy as np
import pytest

from steerank import datagen


def make_item(id, seller=0, category=0, ctype="text", prio=0, cold=False,
              new=False, ctr=0.1, features=None):
    if features is None:
        features = np.zeros(4)
    return datagen.Item(id=id, seller=seller, category=category, ctype=ctype,
                        prio=prio, cold=cold, new=new, ctr=float(ctr),
                        features=np.asarray(features, dtype=np.float64))


def random_items(rng, n, n_sellers=4, n_categories=3, d=4):
    return [
        make_item(
            id=i,
            seller=int(rng.integers(n_sellers)),
            category=int(rng.integers(n_categories)),
            ctype=str(rng.choice(["text", "image", "video"])),
            prio=int(rng.integers(3)),
            cold=bool(rng.random() < 0.3),
            new=bool(rng.random() < 0.3),
            ctr=float(rng.uniform()),
            features=rng.normal(size=d),
        )
        for i in range(n)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_dg_config():
    cfg = dict(datagen.DATAGEN_DEFAULTS)
    cfg.update(catalog_size=60, n_sellers=5, n_categories=4, d_item=4,
               d_user=4, M=6, N=3, n_train=40, n_test=16)
    return cfg


@pytest.fixture
def tiny_samples(tiny_dg_config):
    cat = datagen.generate_catalog(tiny_dg_config, 5)
    cm = datagen.build_click_model(tiny_dg_config, 5)
    return datagen.generate_logs(cat, cm, tiny_dg_config, 12, 5, stream=1)
