"""
Table formatter for displaying solver results in CLI.
"""

import math
from typing import Any, Dict, Optional

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table


class ResultTableFormatter:
    """Formatter for displaying result tables in a rich CLI table."""

    def __init__(self):
        """Initialize the formatter with a console."""
        self.console = Console()

    def _table(self, title: str) -> Table:
        return Table(
            title=title,
            show_header=True,
            header_style="bold magenta",
            border_style="blue",
            title_style="bold cyan",
        )

    def display_frame(
        self,
        frame: pd.DataFrame,
        title: str,
        max_rows: int = 20,
        columns: Optional[list] = None,
    ) -> None:
        """
        Display the head and tail of a result table.

        Args:
            frame: Result rows
            title: Table title
            max_rows: Rows shown before eliding the middle
            columns: Subset of columns to show (all by default)
        """
        if frame is None or frame.empty:
            self.console.print(
                Panel(
                    "No results to display 📭",
                    style="blue",
                    border_style="blue",
                )
            )
            return

        columns = columns or list(frame.columns)
        table = self._table(title)
        for name in columns:
            table.add_column(name, style="cyan", no_wrap=True)

        if len(frame) > max_rows:
            half = max_rows // 2
            shown = [frame.head(half), None, frame.tail(max_rows - half)]
        else:
            shown = [frame]
        for part in shown:
            if part is None:
                table.add_row(*["[dim]…[/dim]"] * len(columns))
                continue
            for _, row in part[columns].iterrows():
                table.add_row(*[self._format_value(v) for v in row])

        self.console.print(table)
        self.console.print(
            f"\n[bold green]{len(frame)} row(s) in total[/bold green]"
        )

    def display_summary(self, summary: Dict[str, Any], title: str) -> None:
        """Display key/value diagnostics as a two-column table."""
        table = self._table(title)
        table.add_column("Quantity", style="cyan", no_wrap=True)
        table.add_column("Value", style="green")
        for key, value in summary.items():
            table.add_row(str(key), self._format_value(value))
        self.console.print(table)

    def _format_value(self, value: Any) -> str:
        """
        Format a cell for display.

        Args:
            value: Raw value

        Returns:
            Formatted string; NaN shows as a dim placeholder
        """
        if isinstance(value, complex):
            return f"{value.real:.10g}{value.imag:+.10g}j"
        if isinstance(value, float):
            if math.isnan(value):
                return "[dim](failed)[/dim]"
            return f"{value:.10g}"
        return str(value)
