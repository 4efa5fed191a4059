import numpy as np

from crowdseg.mask_core import BinaryPlane, LabelMap

FIXTURES = __file__.rsplit("/", 1)[0] + "/fixtures"


def lm(rows, palette):
    rows = np.asarray(rows, dtype=np.uint8)
    return LabelMap(rows.shape[1], rows.shape[0], rows, palette)


def bp(rows):
    rows = np.asarray(rows, dtype=bool)
    return BinaryPlane(rows.shape[1], rows.shape[0], rows)
