import unittest
import math
import os
import shutil
import tempfile
from datetime import date
from wearable_graph_project.core.errors import ArgumentError, DataFormatError
from wearable_graph_project.core.ingestion import (
    load_cohort, load_subject_csv, missing_rate, numeric_series, paired_observations, pairwise_mi,
    select_participants, selection_stats, valid_period, variability, write_subject_csv,
)
from wearable_graph_project.core.state import ValueKind
from wearable_graph_project.tests.builders import make_subject


class TestLoadSubjectCsv(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def _write(self, text, name="subject.csv"):
        path = os.path.join(self.test_dir, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_kinds_and_missing_cells(self):
        path = self._write(
            "date,Steps taken,Lifelog\n"
            "2021-01-02,1200,Went hiking\n"
            "2021-01-01,,\n"
            "2021-01-03,900.5,Rest day\n"
        )
        subject = load_subject_csv(path, "s1")
        self.assertEqual(subject.metric_kinds, {"Steps taken": ValueKind.NUMERIC, "Lifelog": ValueKind.TEXTUAL})
        steps = subject.series["Steps taken"]
        self.assertEqual([r.day for r in steps], [date(2021, 1, 1), date(2021, 1, 2), date(2021, 1, 3)])
        self.assertEqual([r.value for r in steps], [None, 1200.0, 900.5])
        self.assertIsNone(subject.series["Lifelog"][0].value)
        self.assertEqual(subject.series["Lifelog"][1].value, "Went hiking")

    def test_duplicate_date(self):
        path = self._write("date,Steps taken\n2021-01-01,1\n2021-01-01,2\n")
        with self.assertRaises(DataFormatError) as context:
            load_subject_csv(path, "s1")
        self.assertEqual(context.exception.day, "2021-01-01")

    def test_unparsable_date(self):
        path = self._write("date,Steps taken\n2021-01-01,1\n01/02/2021,2\n")
        with self.assertRaises(DataFormatError) as context:
            load_subject_csv(path, "s1")
        self.assertEqual(context.exception.row, 3)

    def test_first_column_must_be_date(self):
        path = self._write("day,Steps taken\n2021-01-01,1\n")
        with self.assertRaises(DataFormatError):
            load_subject_csv(path, "s1")

    def test_empty_file(self):
        with self.assertRaises(DataFormatError):
            load_subject_csv(self._write(""), "s1")

    def test_write_then_load(self):
        subject = make_subject("s9", {"Steps taken": [1.5, None, 3.0], "Lifelog": ["a", None, "b, c"]})
        path = os.path.join(self.test_dir, "s9.csv")
        write_subject_csv(subject, path)
        self.assertEqual(load_subject_csv(path, "s9"), subject)

    def test_load_cohort(self):
        self._write("date,Steps taken\n2021-01-01,1\n", "b.csv")
        self._write("date,Steps taken\n2021-01-01,2\n", "a.csv")
        cohort = load_cohort(self.test_dir)
        self.assertEqual([s.subject_id for s in cohort], ["a", "b"])
        with self.assertRaises(FileNotFoundError):
            load_cohort(os.path.join(self.test_dir, "nope"))


class TestSeriesHelpers(unittest.TestCase):
    def setUp(self):
        self.subject = make_subject("s1", {
            "Steps taken": [1.0, 2.0, 3.0, None],
            "Sleep efficiency": [4.0, None, 6.0, 8.0],
            "Lifelog": ["x", None, None, "y"],
        })

    def test_numeric_series(self):
        series = numeric_series(self.subject, "Steps taken")
        self.assertEqual(len(series), 4)
        self.assertTrue(math.isnan(series.iloc[3]))
        self.assertIs(numeric_series(self.subject, "Steps taken"), series)
        with self.assertRaises(ArgumentError):
            numeric_series(self.subject, "Lifelog")

    def test_paired_observations(self):
        self.assertEqual(paired_observations(self.subject, "Steps taken", "Sleep efficiency"), [(1.0, 4.0), (3.0, 6.0)])
        self.assertEqual(paired_observations(self.subject, "Steps taken", "Lifelog"), [])
        self.assertEqual(paired_observations(self.subject, "Steps taken", "Unknown"), [])

    def test_missing_rate_and_period(self):
        # 1/4, 1/4 and 2/4 missing
        self.assertAlmostEqual(missing_rate(self.subject), 1.0 / 3.0, places=12)
        self.assertEqual(valid_period(self.subject), 3)


class TestSelectionStatistics(unittest.TestCase):
    def test_variability(self):
        subject = make_subject("s1", {"a": [1.0, 2.0, 3.0], "b": [-1.0, 0.0, 1.0], "c": [5.0, None, None]})
        result = variability(subject)
        self.assertAlmostEqual(result.cv, 0.5, places=12)
        self.assertEqual(result.eligible_metrics, 1)
        self.assertFalse(result.no_eligible_metrics)

    def test_no_eligible_metrics(self):
        result = variability(make_subject("s1", {"Lifelog": ["x", "y"]}))
        self.assertTrue(result.no_eligible_metrics)
        self.assertEqual(result.cv, 0.0)

    def test_pairwise_mi(self):
        values = [float(i % 2) for i in range(20)]
        subject = make_subject("s1", {"a": values, "b": values, "c": values[:9] + [None] * 11})
        self.assertAlmostEqual(pairwise_mi(subject, bins=2), math.log(2), places=12)

    def test_selection_stats(self):
        subject = make_subject("s1", {"a": [1.0, 2.0, 3.0], "b": [2.0, None, 2.0]})
        stats = selection_stats(subject)
        self.assertAlmostEqual(stats.md, 1.0 / 6.0, places=12)
        self.assertEqual(stats.vl, 2)
        self.assertEqual(stats.mi, 0.0)


class TestSelectParticipants(unittest.TestCase):
    def setUp(self):
        self.cohort = []
        for i in range(12):
            values = [10.0 + (d % 5) * (i + 1) for d in range(40)]
            self.cohort.append(make_subject(f"s{i:02d}", {"a": values}))
        self.cohort.append(make_subject("sparse", {"a": [1.0] + [None] * 39}))
        self.cohort.append(make_subject("short", {"a": [1.0, 2.0, 3.0]}))

    def test_stratified_sample(self):
        result = select_participants(self.cohort, 5, seed=3)
        self.assertEqual(len(result.subject_ids), 5)
        self.assertEqual(len(set(result.subject_ids)), 5)
        self.assertEqual(len(result.eligible), 12)
        self.assertNotIn("sparse", result.eligible)
        self.assertNotIn("short", result.eligible)
        self.assertFalse(result.shortfall)
        self.assertEqual(select_participants(self.cohort, 5, seed=3), result)

    def test_shortfall(self):
        result = select_participants(self.cohort, 20, seed=0)
        self.assertTrue(result.shortfall)
        self.assertEqual(sorted(result.subject_ids), sorted(result.eligible))

    def test_bad_n(self):
        with self.assertRaises(ArgumentError):
            select_participants(self.cohort, 0, seed=0)

if __name__ == "__main__":
    unittest.main()
