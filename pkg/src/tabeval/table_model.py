"""Table tree model: parsing, serialization, tokenization and grid projection.

A table is an ordered tree ``table -> (thead?, tbody?) -> tr -> td``. Cells are
leaves carrying ``colspan``, ``rowspan`` and a token sequence where every
character is one token and every inline markup tag (``<b>``, ``</b>``, ...) is
one token.
"""

from __future__ import annotations

import enum
import html
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator, Optional, Sequence

INLINE_TAGS = frozenset({"b", "i", "u", "sup", "sub", "em", "strong"})
MAX_SPAN = 1000

_SECTION_TAGS = ("thead", "tbody")


class TableParseError(ValueError):
    """Base class for all table parsing errors."""


class MalformedMarkup(TableParseError):
    pass


class EmptyInput(TableParseError):
    pass


class SpanOutOfRange(TableParseError):
    pass


class OverlappingSpans(ValueError):
    pass


class Kind(str, enum.Enum):
    TABLE = "table"
    THEAD = "thead"
    TBODY = "tbody"
    ROW = "tr"
    CELL = "td"


class Mode(str, enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class Complexity(str, enum.Enum):
    SIMPLE = "simple"
    COMPLEX = "complex"


@dataclass(frozen=True)
class TreeNode:
    kind: Kind
    children: tuple[TreeNode, ...] = ()
    colspan: int = 1
    rowspan: int = 1
    content: tuple[str, ...] = ()

    @property
    def is_cell(self) -> bool:
        return self.kind is Kind.CELL

    def iter_nodes(self) -> Iterator[TreeNode]:
        """Pre-order traversal."""
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)


def cell(content: str | Sequence[str] = "", colspan: int = 1, rowspan: int = 1) -> TreeNode:
    """Build a cell node; a plain string is split into character tokens."""
    tokens = tuple(content) if isinstance(content, str) else tuple(content)
    return TreeNode(Kind.CELL, colspan=colspan, rowspan=rowspan, content=tokens)


def row(*cells: TreeNode) -> TreeNode:
    return TreeNode(Kind.ROW, tuple(cells))


@dataclass(frozen=True)
class TableTree:
    root: TreeNode

    def __post_init__(self) -> None:
        if self.root.kind is not Kind.TABLE:
            raise ValueError("root of a TableTree must be a table node")

    @classmethod
    def from_rows(
        cls,
        body: Sequence[TreeNode] = (),
        head: Optional[Sequence[TreeNode]] = None,
    ) -> TableTree:
        sections = []
        if head is not None:
            sections.append(TreeNode(Kind.THEAD, tuple(head)))
        sections.append(TreeNode(Kind.TBODY, tuple(body)))
        return cls(TreeNode(Kind.TABLE, tuple(sections)))

    @property
    def thead(self) -> Optional[TreeNode]:
        return next((s for s in self.root.children if s.kind is Kind.THEAD), None)

    @property
    def tbody(self) -> Optional[TreeNode]:
        return next((s for s in self.root.children if s.kind is Kind.TBODY), None)

    def rows(self) -> list[TreeNode]:
        """Rows in layout order: header rows first, then body rows."""
        return [r for section in self.root.children for r in section.children]

    def cells(self) -> list[TreeNode]:
        return [n for n in self.root.iter_nodes() if n.is_cell]

    def size(self) -> int:
        return self.root.size()

    def strip_content(self) -> TableTree:
        return TableTree(_strip(self.root))

    def __str__(self) -> str:
        return serialize(self)


def _strip(node: TreeNode) -> TreeNode:
    if node.is_cell:
        return TreeNode(Kind.CELL, colspan=node.colspan, rowspan=node.rowspan)
    return TreeNode(node.kind, tuple(_strip(c) for c in node.children))


def is_tag_token(token: str) -> bool:
    return len(token) > 1


def plain_text(tokens: Sequence[str]) -> str:
    return "".join(t for t in tokens if not is_tag_token(t))


# --------------------------------------------------------------------------
# parsing

class _EventCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.events: list[tuple] = []

    def handle_starttag(self, tag, attrs):
        self.events.append(("start", tag, attrs))

    def handle_startendtag(self, tag, attrs):
        self.events.append(("start", tag, attrs))
        self.events.append(("end", tag))

    def handle_endtag(self, tag):
        self.events.append(("end", tag))

    def handle_data(self, data):
        if self.events and self.events[-1][0] == "data":
            self.events[-1] = ("data", self.events[-1][1] + data)
        else:
            self.events.append(("data", data))


def _parse_span(name: str, value: Optional[str]) -> int:
    text = (value or "").strip()
    if not re.fullmatch(r"[0-9]+", text):
        raise SpanOutOfRange(f"{name}={value!r} is not a positive integer")
    span = int(text)
    if span < 1 or span > MAX_SPAN:
        raise SpanOutOfRange(f"{name}={span} outside [1, {MAX_SPAN}]")
    return span


class _TreeBuilder:
    def __init__(self, strict: bool) -> None:
        self.strict = strict
        self.table_open = False
        self.table_done = False
        self.sections: dict[str, list[TreeNode]] = {}
        self.section_order: list[str] = []
        self.section: Optional[str] = None
        self.row: Optional[list[TreeNode]] = None
        self.cell: Optional[list[str]] = None
        self.cell_spans = (1, 1)
        self.inline: list[str] = []
        self.nested_table_depth = 0

    def fail(self, message: str) -> None:
        if self.strict:
            raise MalformedMarkup(message)

    # -- structural helpers
    def open_table(self) -> None:
        self.table_open = True

    def open_section(self, name: str) -> None:
        if not self.table_open:
            self.fail(f"<{name}> outside <table>")
            self.open_table()
        self.close_section()
        if name in self.sections:
            self.fail(f"duplicate <{name}>")
        elif name == "thead" and "tbody" in self.sections:
            self.fail("<thead> after <tbody>")
        if name not in self.sections:
            self.sections[name] = []
            self.section_order.append(name)
        self.section = name

    def close_section(self) -> None:
        self.close_row()
        self.section = None

    def open_row(self) -> None:
        if self.row is not None:
            self.fail("<tr> inside an open row")
            self.close_row()
        if self.section is None:
            self.fail("<tr> outside <thead>/<tbody>")
            self.open_section("tbody")
        self.row = []

    def close_row(self) -> None:
        self.close_cell()
        if self.row is not None:
            self.sections[self.section].append(TreeNode(Kind.ROW, tuple(self.row)))
            self.row = None

    def open_cell(self, attrs) -> None:
        if self.cell is not None:
            self.fail("cell opened inside an open cell")
            self.close_cell()
        if self.row is None:
            self.fail("cell outside <tr>")
            self.open_row()
        colspan = rowspan = 1
        for name, value in attrs:
            if name == "colspan":
                colspan = _parse_span(name, value)
            elif name == "rowspan":
                rowspan = _parse_span(name, value)
            else:
                self.fail(f"unsupported attribute {name!r} on cell")
        self.cell = []
        self.cell_spans = (colspan, rowspan)
        self.inline = []

    def close_cell(self) -> None:
        if self.cell is None:
            return
        if self.inline:
            self.fail(f"unclosed inline tags {self.inline} in cell")
            while self.inline:
                self.cell.append(f"</{self.inline.pop()}>")
        colspan, rowspan = self.cell_spans
        self.row.append(
            TreeNode(Kind.CELL, colspan=colspan, rowspan=rowspan, content=tuple(self.cell))
        )
        self.cell = None

    def close_table(self) -> None:
        self.close_section()
        self.table_open = False
        self.table_done = True

    # -- event handlers
    def start(self, tag: str, attrs) -> None:
        if self.table_done:
            self.fail(f"<{tag}> after the end of the table")
            return
        if self.cell is not None:
            self.start_in_cell(tag, attrs)
            return
        if tag == "table":
            if self.table_open:
                self.fail("nested <table>")
                return
            self.open_table()
        elif tag in _SECTION_TAGS or tag == "tfoot":
            if tag == "tfoot":
                self.fail("<tfoot> is not supported")
                tag = "tbody"
            if self.section == tag and not self.strict:
                return
            self.open_section(tag)
        elif tag == "tr":
            self.open_row()
        elif tag in ("td", "th"):
            self.open_cell(attrs)
        else:
            self.fail(f"unexpected <{tag}> outside a cell")

    def start_in_cell(self, tag: str, attrs) -> None:
        if self.nested_table_depth or tag == "table":
            self.fail("nested <table> inside a cell")
            if tag == "table":
                self.nested_table_depth += 1
            return
        if tag in ("td", "th", "tr") or tag in _SECTION_TAGS or tag == "tfoot":
            self.fail(f"<{tag}> inside an open cell")
            self.close_cell()
            self.start(tag, attrs)
            return
        if tag in INLINE_TAGS:
            if attrs:
                self.fail(f"attributes on inline <{tag}>")
            self.inline.append(tag)
            self.cell.append(f"<{tag}>")
        else:
            self.fail(f"unsupported tag <{tag}> inside a cell")

    def end(self, tag: str) -> None:
        if self.table_done:
            self.fail(f"</{tag}> after the end of the table")
            return
        if self.cell is not None:
            if self.end_in_cell(tag):
                return
        if tag == "table":
            if not self.table_open:
                self.fail("</table> without <table>")
                return
            if self.strict and (self.row is not None or self.section is not None):
                raise MalformedMarkup("</table> with unclosed row or section")
            self.close_table()
        elif tag in _SECTION_TAGS or tag == "tfoot":
            name = "tbody" if tag == "tfoot" else tag
            if self.section != name:
                self.fail(f"</{tag}> without matching <{tag}>")
                if self.section is None:
                    return
            if self.strict and self.row is not None:
                raise MalformedMarkup(f"</{tag}> with an unclosed row")
            self.close_section()
        elif tag == "tr":
            if self.row is None:
                self.fail("</tr> without <tr>")
                return
            self.close_row()
        elif tag in ("td", "th"):
            self.fail(f"</{tag}> without an open cell")
        else:
            self.fail(f"unexpected </{tag}> outside a cell")

    def end_in_cell(self, tag: str) -> bool:
        """Handle an end tag while a cell is open; False means 'not consumed'."""
        if self.nested_table_depth:
            if tag == "table":
                self.nested_table_depth -= 1
            return True
        if tag in ("td", "th"):
            self.close_cell()
            return True
        if tag in INLINE_TAGS:
            if self.inline and self.inline[-1] == tag:
                self.inline.pop()
                self.cell.append(f"</{tag}>")
            elif tag in self.inline:
                self.fail(f"misnested </{tag}>")
                while True:
                    open_tag = self.inline.pop()
                    self.cell.append(f"</{open_tag}>")
                    if open_tag == tag:
                        break
            else:
                self.fail(f"</{tag}> without matching <{tag}>")
            return True
        if tag in ("tr", "table") or tag in _SECTION_TAGS or tag == "tfoot":
            self.fail(f"</{tag}> while a cell is open")
            self.close_cell()
            return False
        self.fail(f"unsupported </{tag}> inside a cell")
        return True

    def data(self, text: str) -> None:
        if self.cell is not None:
            self.cell.extend(text)
        elif text.strip():
            self.fail(f"text {text.strip()[:20]!r} outside a cell")

    def finish(self) -> TableTree:
        if self.strict:
            if not self.table_done:
                raise MalformedMarkup("missing </table>")
            if not self.sections:
                raise MalformedMarkup("table has neither <thead> nor <tbody>")
        else:
            self.close_section()
            if not self.sections:
                self.sections["tbody"] = []
        children = [
            TreeNode(Kind(name), tuple(self.sections[name]))
            for name in _SECTION_TAGS
            if name in self.sections
        ]
        return TableTree(TreeNode(Kind.TABLE, tuple(children)))


def parse_table(html_text: str, mode: Mode | str = Mode.STRICT) -> TableTree:
    """Parse an HTML table into a :class:`TableTree`.

    Strict mode accepts only ``table``/``thead``/``tbody``/``tr``/``td``/``th``
    plus inline tags inside cells, with ``rowspan``/``colspan`` as the only
    attributes. Lenient mode repairs missing wrappers, drops unknown attributes
    and tags (keeping their text), and auto-closes whatever is left open.
    """
    mode = Mode(mode)
    if not html_text or not html_text.strip():
        raise EmptyInput("empty table markup")
    collector = _EventCollector()
    collector.feed(html_text)
    collector.close()
    builder = _TreeBuilder(strict=mode is Mode.STRICT)
    for event in collector.events:
        if event[0] == "start":
            builder.start(event[1], event[2])
        elif event[0] == "end":
            builder.end(event[1])
        else:
            builder.data(event[1])
    return builder.finish()


# --------------------------------------------------------------------------
# serialization and tokenization

def _escape_token(token: str) -> str:
    return token if is_tag_token(token) else html.escape(token, quote=False)


def _span_attributes(node: TreeNode) -> list[str]:
    attrs = []
    if node.colspan > 1:
        attrs.append(f' colspan="{node.colspan}"')
    if node.rowspan > 1:
        attrs.append(f' rowspan="{node.rowspan}"')
    return attrs


@dataclass(frozen=True)
class TokenizedTable:
    structural_tokens: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...] = field(default=())

    def to_html(self) -> str:
        return detokenize(self.structural_tokens, self.cells)


def _structure(node: TreeNode, out: list[str]) -> None:
    tag = node.kind.value
    if node.is_cell:
        attrs = _span_attributes(node)
        if attrs:
            out.extend(["<td", *attrs, ">"])
        else:
            out.append("<td>")
        out.append("</td>")
        return
    out.append(f"<{tag}>")
    for child in node.children:
        _structure(child, out)
    out.append(f"</{tag}>")


def tokenize(tree: TableTree) -> TokenizedTable:
    structural: list[str] = []
    _structure(tree.root, structural)
    return TokenizedTable(tuple(structural), tuple(c.content for c in tree.cells()))


def detokenize(structural_tokens: Sequence[str], cells: Sequence[Sequence[str]]) -> str:
    """Merge structural tokens and per-cell content tokens back into HTML.

    Single-character tokens are HTML-escaped, multi-character tokens are
    markup and emitted verbatim.
    """
    parts: list[str] = []
    cell_iter = iter(cells)
    in_open_td = False
    for token in structural_tokens:
        parts.append(token)
        if token == "<td":
            in_open_td = True
            continue
        if token == "<td>" or (in_open_td and token == ">"):
            in_open_td = False
            try:
                content = next(cell_iter)
            except StopIteration:
                raise ValueError("fewer cell token lists than cells in the structure") from None
            parts.extend(_escape_token(t) for t in content)
    if next(cell_iter, None) is not None:
        raise ValueError("more cell token lists than cells in the structure")
    return "".join(parts)


def serialize(tree: TableTree) -> str:
    tokens = tokenize(tree)
    return detokenize(tokens.structural_tokens, tokens.cells)


# --------------------------------------------------------------------------
# grid projection

@dataclass(frozen=True)
class Slot:
    cell: int  # index into CellGrid.cells
    is_origin: bool


@dataclass(frozen=True)
class CellGrid:
    n_rows: int
    n_cols: int
    slots: tuple[tuple[Optional[Slot], ...], ...]
    cells: tuple[TreeNode, ...]
    origins: tuple[tuple[int, int], ...]
    # (rowspan, colspan) actually occupied, after clipping overflowing rowspans
    extents: tuple[tuple[int, int], ...]

    def __getitem__(self, pos: tuple[int, int]) -> Optional[Slot]:
        return self.slots[pos[0]][pos[1]]

    def cell_at(self, i: int, j: int) -> Optional[TreeNode]:
        slot = self.slots[i][j]
        return None if slot is None else self.cells[slot.cell]


def project_grid(tree: TableTree) -> CellGrid:
    """Lay the table out on a 2D grid of slots.

    Rowspans that run past the last row are clipped. Raises
    :class:`OverlappingSpans` when a cell's rectangle hits an occupied slot.
    """
    rows = tree.rows()
    n_rows = len(rows)
    grid: list[list[Optional[Slot]]] = [[] for _ in range(n_rows)]
    cells: list[TreeNode] = []
    origins: list[tuple[int, int]] = []
    extents: list[tuple[int, int]] = []

    def ensure_width(r: int, width: int) -> None:
        if len(grid[r]) < width:
            grid[r].extend([None] * (width - len(grid[r])))

    for i, tr in enumerate(rows):
        col = 0
        for node in tr.children:
            while col < len(grid[i]) and grid[i][col] is not None:
                col += 1
            rowspan = min(node.rowspan, n_rows - i)
            index = len(cells)
            for r in range(i, i + rowspan):
                ensure_width(r, col + node.colspan)
                for c in range(col, col + node.colspan):
                    if grid[r][c] is not None:
                        raise OverlappingSpans(
                            f"cell {index} at ({i}, {col}) overlaps slot ({r}, {c})"
                        )
                    grid[r][c] = Slot(index, r == i and c == col)
            cells.append(node)
            origins.append((i, col))
            extents.append((rowspan, node.colspan))
            col += node.colspan

    n_cols = max((len(r) for r in grid), default=0)
    for r in range(n_rows):
        ensure_width(r, n_cols)
    return CellGrid(
        n_rows=n_rows,
        n_cols=n_cols,
        slots=tuple(tuple(r) for r in grid),
        cells=tuple(cells),
        origins=tuple(origins),
        extents=tuple(extents),
    )


def classify_complexity(tree: TableTree) -> Complexity:
    if any(c.colspan > 1 or c.rowspan > 1 for c in tree.cells()):
        return Complexity.COMPLEX
    return Complexity.SIMPLE
