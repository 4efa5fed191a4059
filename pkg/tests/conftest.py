import pytest

from crowdseg.mask_core import ClassPalette, PaletteEntry


@pytest.fixture
def palette():
    return ClassPalette([PaletteEntry(1, "Liver"), PaletteEntry(2, "Aorta")])


@pytest.fixture
def heart_palette():
    return ClassPalette(
        [
            PaletteEntry(1, "LA"),
            PaletteEntry(2, "RA"),
            PaletteEntry(3, "LV"),
            PaletteEntry(4, "RV"),
        ]
    )
