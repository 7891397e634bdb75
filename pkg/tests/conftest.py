import pytest

from apunim.model import (
    AnnotationRecord,
    AnnotatorProfile,
    Dataset,
    Dimension,
    LabelScale,
)

SCALE5 = LabelScale("ordinal", ("0", "1", "2", "3", "4"))

ANNOTATIONS_CSV = """item_id,annotator_id,value
c1,a1,0
c1,a2,0
c1,a3,4
c1,a4,4
c1,a5,2
c2,a1,1
c2,a2,1
c2,a3,1
c2,a4,2
c2,a5,1
c3,a1,0
c3,a2,4
c3,a3,0
c3,a4,4
c3,a5,4
"""

ANNOTATORS_CSV = """annotator_id,gender,age
a1,F,young
a2,F,old
a3,M,young
a4,M,old
a5,M,young
"""


@pytest.fixture
def fixture_files(tmp_path):
    ann = tmp_path / "annotations.csv"
    people = tmp_path / "annotators.csv"
    ann.write_text(ANNOTATIONS_CSV, encoding="utf-8")
    people.write_text(ANNOTATORS_CSV, encoding="utf-8")
    return ann, people


@pytest.fixture
def fixture_dataset(fixture_files):
    from apunim.model import load_dataset

    ann, people = fixture_files
    return load_dataset(ann, people, SCALE5, [Dimension("gender"), Dimension("age")])


def make_dataset(item_values, memberships, scale=SCALE5, dimensions=None):
    """Dataset from {item: {annotator: value-or-set}} and {annotator: {dim: group}}."""
    profiles = {
        a: AnnotatorProfile(a, dict(groups)) for a, groups in memberships.items()
    }
    annotations = {}
    for item, votes in item_values.items():
        records = []
        for annotator, value in votes.items():
            values = value if isinstance(value, (set, frozenset)) else {value}
            records.append(AnnotationRecord(item, annotator, frozenset(values)))
        annotations[item] = tuple(records)
    names = sorted({d for g in memberships.values() for d in g})
    if dimensions is None:
        dimensions = []
        for name in names:
            groups = sorted({g[name] for g in memberships.values() if name in g})
            dimensions.append(Dimension(name, tuple(groups)))
    return Dataset(scale, tuple(annotations), annotations, profiles, tuple(dimensions))
