from collections import Counter
from fractions import Fraction

import pytest

from medcorpus.annotation import Annotation, AnnotationSource, DocumentType, DomainLabel
from medcorpus.errors import EmptyInput
from medcorpus.stats import render_table, report_record, score_distribution
from medcorpus.store import iter_annotations


def ann(score, doc_type="study", domain="biomedical", i=[0]):
    i[0] += 1
    return Annotation(
        f"P:{i[0]:04d}", DocumentType(doc_type), DomainLabel(domain), score, "en", None, AnnotationSource.FIXTURE
    )


def test_mean_and_median_simple():
    (d,) = score_distribution([ann(3), ann(4), ann(5)], "none")
    assert d.mean == Fraction(4)
    assert d.median == Fraction(4)
    assert d.group_key == "all"


def test_even_population_median_midpoint():
    (d,) = score_distribution([ann(2), ann(3), ann(4), ann(5)], "none")
    assert d.median == Fraction(7, 2)


def test_review_share_of_score_four():
    annotations = [ann(4, "review") for _ in range(9)] + [ann(2, "review")]
    (d,) = score_distribution(annotations, "doc_type")
    assert d.group_key == "review"
    assert d.share[4] == 0.9
    assert d.counts == {2: 1, 4: 9}


def test_groups_partition_total():
    annotations = (
        [ann(4, "review", "biomedical") for _ in range(5)]
        + [ann(3, "study", "clinical") for _ in range(3)]
        + [ann(1, "other", "other") for _ in range(2)]
    )
    for group_by in ("doc_type", "domain"):
        dists = score_distribution(annotations, group_by)
        assert sum(d.population for d in dists) == len(annotations)
        for d in dists:
            assert abs(sum(d.share.values()) - 1.0) <= 1e-9
            assert min(d.counts) <= d.mean <= max(d.counts)


def test_empty_input_rejected():
    with pytest.raises(EmptyInput):
        score_distribution([], "none")


def test_report_record_two_decimal_rendering():
    annotations = [ann(3), ann(3), ann(4)]
    record = report_record(score_distribution(annotations, "none"), "none")
    group = record["groups"][0]
    assert group["mean"] == "3.33"
    assert group["median"] == "3.00"
    assert group["counts"] == {"3": 2, "4": 1}


def test_table_renders_all_groups():
    annotations = [ann(4, "review"), ann(2, "study"), ann(5, "clinical_case")]
    table = render_table(score_distribution(annotations, "doc_type"))
    for key in ("review", "study", "clinical_case", "mean"):
        assert key in table


def test_fixture_report_matches_counter_oracle(annotations_path):
    annotations = list(iter_annotations(annotations_path))
    expected = Counter(a.edu_score for a in annotations)
    (d,) = score_distribution(annotations, "none")
    assert d.counts == {s: c for s, c in expected.items()}
    assert d.mean == Fraction(sum(a.edu_score for a in annotations), len(annotations))
    by_type = score_distribution(annotations, "doc_type")
    for dist in by_type:
        subset = [a for a in annotations if a.doc_type.value == dist.group_key]
        assert dist.population == len(subset)
        assert dist.counts == dict(Counter(a.edu_score for a in subset))
