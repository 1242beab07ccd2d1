# pylint: disable=missing-module-docstring
# pylint: disable=missing-class-docstring,missing-function-docstring
import math
from unittest.mock import patch, MagicMock

import pandas as pd

from floquet_well.result_table_formatter import ResultTableFormatter


class TestResultTableFormatter:
    def test_format_float(self):
        formatter = ResultTableFormatter()
        # pylint: disable=protected-access
        assert formatter._format_value(0.25) == "0.25"
        assert formatter._format_value(1 / 3) == "0.3333333333"

    def test_format_nan_as_failed(self):
        formatter = ResultTableFormatter()
        # pylint: disable=protected-access
        assert formatter._format_value(math.nan) == "[dim](failed)[/dim]"

    def test_format_complex(self):
        formatter = ResultTableFormatter()
        # pylint: disable=protected-access
        assert formatter._format_value(0.5 - 0.25j) == "0.5-0.25j"

    def test_format_other_values(self):
        formatter = ResultTableFormatter()
        # pylint: disable=protected-access
        assert formatter._format_value(3) == "3"
        assert formatter._format_value("emission") == "emission"

    @patch("floquet_well.result_table_formatter.Console")
    def test_display_empty_frame(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        formatter = ResultTableFormatter()
        formatter.display_frame(pd.DataFrame(), "grid")

        # Should call console.print with a Panel for an empty table
        mock_console.print.assert_called_once()
        call_args = mock_console.print.call_args[0][0]
        assert hasattr(call_args, "renderable")
        assert call_args.renderable == "No results to display 📭"

    @patch("floquet_well.result_table_formatter.Console")
    def test_display_frame(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        formatter = ResultTableFormatter()
        frame = pd.DataFrame(
            {"F2": [0.0, 0.1], "Re_omega": [-0.08, -0.07]}
        )
        formatter.display_frame(frame, "trajectory")

        # Should call console.print twice: once for table, once for summary
        assert mock_console.print.call_count == 2

        table_call = mock_console.print.call_args_list[0][0][0]
        assert table_call.title == "trajectory"
        assert table_call.row_count == 2

        summary_call = mock_console.print.call_args_list[1][0][0]
        assert "2 row(s) in total" in str(summary_call)

    @patch("floquet_well.result_table_formatter.Console")
    def test_display_frame_elides_middle(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        formatter = ResultTableFormatter()
        frame = pd.DataFrame({"omega": [float(i) for i in range(50)]})
        formatter.display_frame(frame, "grid", max_rows=10)

        table_call = mock_console.print.call_args_list[0][0][0]
        # ten rows plus the ellipsis row
        assert table_call.row_count == 11
        summary_call = mock_console.print.call_args_list[1][0][0]
        assert "50 row(s) in total" in str(summary_call)

    @patch("floquet_well.result_table_formatter.Console")
    def test_display_frame_column_subset(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        formatter = ResultTableFormatter()
        frame = pd.DataFrame({"F2": [0.1], "omega": [0.2], "extra": [1.0]})
        formatter.display_frame(frame, "grid", columns=["F2", "omega"])

        table_call = mock_console.print.call_args_list[0][0][0]
        headers = [column.header for column in table_call.columns]
        assert headers == ["F2", "omega"]

    @patch("floquet_well.result_table_formatter.Console")
    def test_display_summary(self, mock_console_class):
        mock_console = MagicMock()
        mock_console_class.return_value = mock_console

        formatter = ResultTableFormatter()
        formatter.display_summary({"points": 12, "final_F2": 0.28}, "Summary")

        mock_console.print.assert_called_once()
        table_call = mock_console.print.call_args[0][0]
        assert table_call.title == "Summary"
        assert table_call.row_count == 2
