import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from partialslice.serializers import ResultRow
from partialslice.services.base_service import ServiceException
from partialslice.services.report_service import emit_csv, format_real, read_csv, summarize

HEADER = 'suite,case,level,metric,value,tolerance,pass'


class ReportServiceTests(SimpleTestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / 'results.csv'

    def tearDown(self):
        self.directory.cleanup()

    def test_empty_file_has_header(self):
        emit_csv([], self.path)
        self.assertEqual(self.path.read_text(), HEADER + '\n')

    def test_single_row(self):
        emit_csv([ResultRow.residual('cif', 'linear', 3, 'relative_error', 1.0 / 3.0, 1e-3)], self.path)
        lines = self.path.read_text().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[1], 'cif,linear,3,relative_error,3.33333333333333e-01,1.00000000000000e-03,false')
        self.assertNotIn('\r', self.path.read_text())

    def test_read_back(self):
        rows = [
            ResultRow.residual('cif', 'linear', 3, 'relative_error', 2.5e-5, 1e-3),
            ResultRow.at_least('cif', 'linear', 5, 'relative_error_order', 2.1, 2.0),
            ResultRow.reported('norms', 'operator_norm', 3, 'ratio_linear', 0.75),
        ]
        emit_csv(rows, self.path)
        self.assertEqual(read_csv(self.path), rows)

    def test_format_real(self):
        self.assertEqual(format_real(0.0), '0.00000000000000e+00')
        self.assertEqual(format_real(float('inf')), 'inf')

    def test_unwritable_path(self):
        with self.assertRaises(ServiceException) as ctx:
            emit_csv([], Path(self.directory.name) / 'missing' / 'results.csv')
        self.assertEqual(ctx.exception.code, 'unwritable_path')

    def test_summarize(self):
        rows = [
            ResultRow.residual('cif', 'linear', 3, 'm', 1.0, 0.0),
            ResultRow.residual('cif', 'square', 3, 'm', 0.0, 0.0),
            ResultRow.residual('algebra', 'laws', 0, 'm', 0.0, 0.0),
        ]
        self.assertEqual(summarize(rows), {
            'cif': {'passed': 1, 'failed': 1},
            'algebra': {'passed': 1, 'failed': 0},
        })
