"""Ingestion, label detection, fingerprinting, search, and round-trips."""

import hashlib

import pytest

from screenloop import corpus
from screenloop.errors import (
    AmbiguousLabels,
    BadHeader,
    BadLabelValue,
    CsvSyntax,
    EmptyDataset,
    EmptyQuery,
    MalformedRis,
    NotUtf8,
    UnsupportedFormat,
)

MINIMAL_RIS = b"TY  - JOUR\nTI  - A title\nAB  - An abstract\nER  - \n"


class TestParseRis:
    def test_minimal_entry(self):
        ds = corpus.parse_ris(MINIMAL_RIS)
        assert ds.n_records == 1
        assert ds.records[0].title == "A title"
        assert ds.records[0].abstract == "An abstract"
        assert ds.source_format == "RIS"

    def test_repeated_authors_join(self):
        data = (
            b"TY  - JOUR\nTI  - T\nAU  - Smith, J.\nAU  - Lee, K.\nER  - \n"
        )
        ds = corpus.parse_ris(data)
        assert ds.records[0].authors == "Smith, J.; Lee, K."

    def test_entry_without_text_is_rejected_with_diagnostic(self):
        data = (
            b"TY  - JOUR\nTI  - first\nER  - \n"
            b"TY  - JOUR\nAU  - Nobody\nER  - \n"
            b"TY  - JOUR\nTI  - third\nER  - \n"
        )
        ds = corpus.parse_ris(data)
        assert ds.n_records == 2
        assert ds.diagnostics.n_rejected == 1
        assert ds.diagnostics.rejected[0].input_index == 1
        # survivors are renumbered densely
        assert [r.row_id for r in ds.records] == [0, 1]
        assert [r.title for r in ds.records] == ["first", "third"]

    def test_continuation_lines_concatenate_with_single_space(self):
        data = b"TY  - JOUR\nTI  - A very\n  long title\nER  - \n"
        ds = corpus.parse_ris(data)
        assert ds.records[0].title == "A very long title"

    def test_missing_er_reports_line(self):
        data = b"TY  - JOUR\nTI  - first\nER  - \nTY  - JOUR\nTI  - x\n"
        with pytest.raises(MalformedRis) as err:
            corpus.parse_ris(data)
        assert err.value.line == 4

    def test_bad_tag_spacing_reports_line(self):
        data = b"TY  - JOUR\nTI - bad spacing\nER  - \n"
        with pytest.raises(MalformedRis) as err:
            corpus.parse_ris(data)
        assert err.value.line == 2

    def test_empty_input(self):
        with pytest.raises(EmptyDataset):
            corpus.parse_ris(b"\n\n")

    def test_bom_tolerated(self):
        ds = corpus.parse_ris(b"\xef\xbb\xbf" + MINIMAL_RIS)
        assert ds.n_records == 1

    def test_unknown_tags_counted(self):
        data = b"TY  - JOUR\nTI  - T\nPY  - 1999\nPY  - 2000\nER  - \n"
        ds = corpus.parse_ris(data)
        assert ds.diagnostics.unknown_tags == {"PY": 2}

    def test_labels_via_n1_convention(self):
        data = (
            b"TY  - JOUR\nTI  - a\nN1  - ASReview_relevant\nER  - \n"
            b"TY  - JOUR\nTI  - b\nN1  - ASReview_irrelevant\nER  - \n"
            b"TY  - JOUR\nTI  - c\nER  - \n"
        )
        ds = corpus.parse_ris(data)
        assert ds.labels() == [1, 0, None]

    def test_all_mapped_fields(self):
        data = (
            b"TY  - JOUR\nTI  - T\nAB  - A\nAU  - X\nKW  - k1\nKW  - k2\n"
            b"DO  - 10.1/x\nUR  - http://e.test/1\nER  - \n"
        )
        r = corpus.parse_ris(data).records[0]
        assert (r.keywords, r.doi, r.url) == ("k1; k2", "10.1/x", "http://e.test/1")


class TestParseCsv:
    def test_minimal(self):
        ds = corpus.parse_csv(b"title,abstract\nt1,a1\n")
        assert ds.n_records == 1
        assert (ds.records[0].title, ds.records[0].abstract) == ("t1", "a1")

    def test_quoted_field_with_comma(self):
        ds = corpus.parse_csv(b'title,abstract\nt1,"a, b"\n')
        assert ds.records[0].abstract == "a, b"

    def test_quoted_field_with_newline_and_doubled_quote(self):
        ds = corpus.parse_csv(b'title,abstract\n"t\n1","say ""hi"""\n')
        assert ds.records[0].title == "t\n1".replace("\n", "\n")
        assert ds.records[0].abstract == 'say "hi"'

    def test_label_column_detected(self):
        ds = corpus.parse_csv(b"Title,Abstract,label_included\nt1,a1,1\nt2,a2,0\n")
        assert ds.labels() == [1, 0]

    def test_alias_columns_case_insensitive(self):
        ds = corpus.parse_csv(b"PRIMARY_TITLE,Notes_Abstract\nt,a\n")
        assert ds.records[0].title == "t"
        assert ds.records[0].abstract == "a"

    def test_no_text_columns(self):
        with pytest.raises(BadHeader):
            corpus.parse_csv(b"authors,doi\nx,y\n")

    def test_unbalanced_quote_line_number(self):
        with pytest.raises(CsvSyntax) as err:
            corpus.parse_csv(b'title,abstract\nok,fine\n"broken,oops\n')
        assert err.value.line == 3

    def test_not_utf8(self):
        with pytest.raises(NotUtf8):
            corpus.parse_csv(b"title,abstract\n\xff\xfe,x\n")

    def test_ignored_columns_tracked(self):
        ds = corpus.parse_csv(b"title,abstract,venue\nt,a,V\n")
        assert ds.diagnostics.ignored_columns == ["venue"]

    def test_short_rows_padded(self):
        ds = corpus.parse_csv(b"title,abstract\nonly-title\n")
        assert ds.records[0].title == "only-title"
        assert ds.records[0].abstract == ""

    def test_empty_text_row_rejected(self):
        ds = corpus.parse_csv(b"title,abstract,doi\nt1,a1,d\n,,d2\nt3,a3,d3\n")
        assert ds.n_records == 2
        assert ds.diagnostics.rejected[0].input_index == 1

    def test_xlsx_refused_with_pointer(self):
        with pytest.raises(UnsupportedFormat, match="CSV"):
            corpus.parse_auto(b"PK\x03\x04...", "sheet.xlsx")


class TestDetectLabels:
    def test_no_candidate(self):
        assert corpus.detect_labels(["title", "abstract"], []) is None

    def test_value_mapping(self):
        col, labels = corpus.detect_labels(
            ["title", "label_included"],
            [["t", "1"], ["t", "0"], ["t", ""]],
        )
        assert col == 1
        assert labels == [1, 0, None]

    def test_word_values(self):
        _, labels = corpus.detect_labels(
            ["included", "title"],
            [["yes", "t"], ["Excluded", "t"], ["TRUE", "t"]],
        )
        assert labels == [1, 0, 1]

    def test_ambiguous(self):
        with pytest.raises(AmbiguousLabels):
            corpus.detect_labels(["label", "labels", "title"], [])

    def test_bad_value_reports_row(self):
        with pytest.raises(BadLabelValue) as err:
            corpus.detect_labels(["label"], [["1"], ["maybe"]])
        assert err.value.row == 1

    def test_counts_partition(self, tiny_labeled_dataset):
        labels = tiny_labeled_dataset.labels()
        labeled = sum(1 for v in labels if v is not None)
        unlabeled = sum(1 for v in labels if v is None)
        assert labeled + unlabeled == tiny_labeled_dataset.n_records


class TestFingerprint:
    def test_deterministic(self):
        data = b"title,abstract\nt1,a1\nt2,a2\n"
        assert corpus.parse_csv(data).fingerprint == corpus.parse_csv(data).fingerprint

    def test_column_order_irrelevant(self):
        a = corpus.parse_csv(b"title,abstract\nt1,a1\n")
        b = corpus.parse_csv(b"abstract,title\na1,t1\n")
        assert a.fingerprint == b.fingerprint

    def test_single_character_change(self):
        a = corpus.parse_csv(b"title,abstract\nt1,a1\n")
        b = corpus.parse_csv(b"title,abstract\nt1,a2\n")
        assert a.fingerprint != b.fingerprint
        # reference implementation: sha256 over the canonical serialization
        expected = hashlib.sha256("t1a1\n".encode()).hexdigest()
        assert a.fingerprint == expected
        assert len(a.fingerprint) == 64

    def test_ris_and_csv_same_content_match(self):
        ris = corpus.parse_ris(
            b"TY  - JOUR\nTI  - t1\nAB  - a1\nER  - \n"
            b"TY  - JOUR\nTI  - t2\nAB  - a2\nER  - \n"
        )
        csv = corpus.parse_csv(b"title,abstract\nt1,a1\nt2,a2\n")
        assert ris.fingerprint == csv.fingerprint

    def test_labels_do_not_change_fingerprint(self):
        a = corpus.parse_csv(b"title,abstract\nt1,a1\n")
        b = corpus.parse_csv(b"title,abstract,label\nt1,a1,1\n")
        assert a.fingerprint == b.fingerprint


class TestSearch:
    @pytest.fixture()
    def ds(self):
        rows = ["title,abstract"]
        for i in range(10):
            rows.append(f"paper number{i},about topic{i} and common things")
        rows[8] = "unique snowflake paper,entirely different abstract"
        return corpus.parse_csv(("\n".join(rows) + "\n").encode())

    def test_unique_title_token_first(self, ds):
        assert corpus.search_records(ds, "snowflake", 5) == [7]

    def test_absent_token_empty(self, ds):
        assert corpus.search_records(ds, "nonexistentterm", 5) == []

    def test_tie_breaks_by_row_id(self, ds):
        hits = corpus.search_records(ds, "common", 5)
        assert hits == sorted(hits)
        assert len(hits) == 5

    def test_title_weighs_double(self, ds):
        # "paper" appears in every title (weight 2) and in row 7's title too
        hits = corpus.search_records(ds, "paper things", 20)
        # rows with both title hit (2) + abstract hit (1) = 3 outrank title-only
        assert corpus.search_records(ds, "paper", 20)[0] == 0

    def test_empty_query(self, ds):
        with pytest.raises(EmptyQuery):
            corpus.search_records(ds, "   ", 3)

    def test_output_is_bounded_subset(self, ds):
        hits = corpus.search_records(ds, "about common paper", 4)
        assert len(hits) <= 4
        assert all(0 <= h < ds.n_records for h in hits)


class TestRoundTrips:
    def test_csv_export_reparses_identically(self, tiny_labeled_dataset):
        blob = corpus.write_csv(tiny_labeled_dataset.records)
        again = corpus.parse_csv(blob)
        assert again.n_records == tiny_labeled_dataset.n_records
        for a, b in zip(tiny_labeled_dataset.records, again.records):
            assert a == b
        assert again.fingerprint == tiny_labeled_dataset.fingerprint

    def test_ris_to_csv_to_ris_preserves_fields(self):
        ris = (
            b"TY  - JOUR\nTI  - t one\nAB  - a one\nAU  - A. Author\n"
            b"N1  - ASReview_relevant\nER  - \n"
            b"TY  - JOUR\nTI  - t two\nAB  - a two\nN1  - ASReview_irrelevant\nER  - \n"
        )
        first = corpus.parse_ris(ris)
        second = corpus.parse_csv(corpus.write_csv(first.records))
        third = corpus.parse_ris(corpus.write_ris(second.records))
        for a, b in zip(first.records, third.records):
            assert (a.title, a.abstract, a.label) == (b.title, b.abstract, b.label)
        assert first.fingerprint == third.fingerprint

    def test_csv_labels_become_n1_tags(self):
        ds = corpus.parse_csv(b"title,abstract,label\nt,a,1\nu,b,0\n")
        text = corpus.write_ris(ds.records).decode()
        assert "N1  - ASReview_relevant" in text
        assert "N1  - ASReview_irrelevant" in text
