import pytest

from report_fixtures import row


@pytest.fixture
def fixture_rows():
    """Three instances in both modes; hand-computed separation flags live
    in the tests. The po/35 learning pair is inverted (min above max)."""
    return [
        # fo: uniform + strategy sampling
        row(5, "uniform", "none", "fo", 35.5, 0.3),
        row(5, "lss-small", "max", "fo", 43.4, 0.3, 2, 3),
        row(5, "lss-small", "min", "fo", 28.4, 0.3, 4, 5),
        row(9, "uniform", "none", "fo", 62.0, 0.5),
        row(9, "lss-small", "max", "fo", 62.8, 0.5, 40, 25),
        row(9, "lss-small", "min", "fo", 60.0, 0.5, 44, 31),
        row(35, "uniform", "none", "fo", 150.0, 1.0),
        row(35, "lss-small", "max", "fo", 160.0, 1.0, 300, 180),
        row(35, "lss-small", "min", "fo", 149.0, 1.0, 280, 175),
        # po: uniform + learning, the 35 pair inverted
        row(5, "uniform", "none", "po", 35.5, 0.3),
        row(5, "qlearn-small", "max", "po", 36.0, 0.3, 6, 5),
        row(5, "qlearn-small", "min", "po", 35.0, 0.3, 6, 5),
        row(9, "uniform", "none", "po", 62.0, 0.5),
        row(9, "qlearn-small", "max", "po", 64.0, 0.5, 25, 17),
        row(9, "qlearn-small", "min", "po", 61.0, 0.5, 23, 15),
        row(35, "uniform", "none", "po", 150.0, 1.0),
        row(35, "qlearn-small", "max", "po", 148.0, 1.0, 120, 80),
        row(35, "qlearn-small", "min", "po", 152.0, 1.0, 110, 74),
    ]
