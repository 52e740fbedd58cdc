//! Recovers document structure from flat drug-label text: numbered
//! headings, captioned tables with classified rows, asterisk lists, and
//! paragraphs. Also splits a structured document into text units under
//! the whole-element and sub-element strategies.
//!
//! All extents are code-point offsets into the original document string.

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use crate::text::cp_slice;

// numbering must contain a dot: "5.1 Title", "5. Title" but not "10 mg"
fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+(?:\.\d+)+\.?|\d+\.)\s+\S").unwrap())
}

fn caption_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*Table\s+\S+\.").unwrap())
}

/// Half-open code-point extent.
pub type Span = (usize, usize);

/// A text fragment with its document extent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Segment {
    pub fn extent(&self) -> Span {
        (self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub extent: Span,
    pub text: String,
}

/// One table row; rows may have different cell counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub extent: Span,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub extent: Span,
    pub caption_rows: Vec<Row>,
    pub header_rows: Vec<Row>,
    pub content_rows: Vec<Row>,
    pub footer_rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListElement {
    pub extent: Span,
    pub items: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Heading,
    Table,
    List,
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocumentElement {
    Heading(Segment),
    Table(Table),
    List(ListElement),
    Paragraph(Segment),
}

impl DocumentElement {
    pub fn kind(&self) -> ElementKind {
        match self {
            DocumentElement::Heading(_) => ElementKind::Heading,
            DocumentElement::Table(_) => ElementKind::Table,
            DocumentElement::List(_) => ElementKind::List,
            DocumentElement::Paragraph(_) => ElementKind::Paragraph,
        }
    }

    pub fn extent(&self) -> Span {
        match self {
            DocumentElement::Heading(s) | DocumentElement::Paragraph(s) => s.extent(),
            DocumentElement::Table(t) => t.extent,
            DocumentElement::List(l) => l.extent,
        }
    }
}

/// Parsed document: original text plus ordered elements.
#[derive(Debug, Clone)]
pub struct StructuredDocument {
    pub text: String,
    pub elements: Vec<DocumentElement>,
}

/// Where a text unit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitOrigin {
    pub element: usize,
    /// Position among the element's sub-units; `None` for whole-element
    /// units.
    pub sub_index: Option<usize>,
}

/// A tagging unit: a contiguous slice of the document with the mapping
/// back to document offsets.
#[derive(Debug, Clone)]
pub struct TextUnit {
    pub text: String,
    doc_start: usize,
    pub origin: UnitOrigin,
}

impl TextUnit {
    pub fn new(text: impl Into<String>, doc_start: usize, origin: UnitOrigin) -> TextUnit {
        TextUnit {
            text: text.into(),
            doc_start,
            origin,
        }
    }

    /// A unit covering a full standalone text (tests, whole-document
    /// tokenization).
    pub fn whole_text(text: impl Into<String>) -> TextUnit {
        TextUnit::new(
            text,
            0,
            UnitOrigin {
                element: 0,
                sub_index: None,
            },
        )
    }

    pub fn doc_start(&self) -> usize {
        self.doc_start
    }

    /// Maps a unit-local offset to a document offset.
    pub fn to_doc(&self, local: usize) -> usize {
        self.doc_start + local
    }

    pub fn to_doc_span(&self, local: Span) -> Span {
        (self.doc_start + local.0, self.doc_start + local.1)
    }

    /// Projects a document span into unit-local coordinates, clipped to
    /// the unit. `None` when the overlap is empty.
    pub fn project(&self, doc_span: Span, unit_len: usize) -> Option<Span> {
        let unit_end = self.doc_start + unit_len;
        let s = doc_span.0.max(self.doc_start);
        let e = doc_span.1.min(unit_end);
        if s >= e {
            None
        } else {
            Some((s - self.doc_start, e - self.doc_start))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// One unit per element (table/list/paragraph as a whole).
    WholeElement,
    /// One unit per table cell and list item; headings, paragraphs, and
    /// table caption/footer rows each become one unit.
    SubElement,
}

#[derive(Debug, Clone)]
struct Line {
    start: usize,
    end: usize,
    text: String,
}

fn split_lines(text: &str) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut line_start = 0usize;
    let mut buf = String::new();
    let mut cp = 0usize;
    for (i, ch) in text.chars().enumerate() {
        cp = i + 1;
        if ch == '\n' {
            lines.push(Line {
                start: line_start,
                end: i,
                text: std::mem::take(&mut buf),
            });
            line_start = i + 1;
        } else {
            buf.push(ch);
        }
    }
    if cp > line_start {
        lines.push(Line {
            start: line_start,
            end: cp,
            text: buf,
        });
    }
    lines
}

fn is_heading(line: &str) -> bool {
    heading_re().is_match(line)
}

fn is_caption_trigger(line: &str) -> bool {
    caption_re().is_match(line)
}

fn is_bullet(line: &str) -> bool {
    line.trim_start().starts_with('*')
}

/// Trims a line region, returning the trimmed text and its extent.
fn trimmed_segment(text: &str, start: usize) -> Option<Segment> {
    let lead = text.chars().take_while(|c| c.is_whitespace()).count();
    let total = text.chars().count();
    let trail = text
        .chars()
        .rev()
        .take_while(|c| c.is_whitespace())
        .count();
    if lead + trail >= total {
        return None;
    }
    let trimmed: String = text
        .chars()
        .skip(lead)
        .take(total - lead - trail)
        .collect();
    Some(Segment {
        start: start + lead,
        end: start + total - trail,
        text: trimmed,
    })
}

fn is_numeric_cell(text: &str) -> bool {
    let non_space: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    if non_space.is_empty() {
        return false;
    }
    let numeric = non_space
        .iter()
        .filter(|c| c.is_ascii_digit() || matches!(c, '%' | '.' | '(' | ')' | '-'))
        .count();
    numeric * 2 >= non_space.len()
}

/// Splits a candidate row into cells: on tabs when the row contains any,
/// otherwise on runs of two or more spaces. Cells are trimmed; empty
/// cells are dropped.
fn split_cells(text: &str, line_start: usize) -> Vec<Cell> {
    let mut raw: Vec<(usize, String)> = Vec::new();
    if text.contains('\t') {
        let mut seg_start = 0usize;
        let mut buf = String::new();
        for (cp, ch) in text.chars().enumerate() {
            if ch == '\t' {
                raw.push((seg_start, std::mem::take(&mut buf)));
                seg_start = cp + 1;
            } else {
                buf.push(ch);
            }
        }
        raw.push((seg_start, buf));
    } else {
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0usize;
        while i < chars.len() {
            // skip a delimiter run of >= 2 spaces
            if chars[i] == ' ' {
                let mut j = i;
                while j < chars.len() && chars[j] == ' ' {
                    j += 1;
                }
                if j - i >= 2 || raw.is_empty() {
                    i = j;
                    continue;
                }
            }
            let seg_start = i;
            let mut buf = String::new();
            while i < chars.len() {
                if chars[i] == ' ' {
                    let mut j = i;
                    while j < chars.len() && chars[j] == ' ' {
                        j += 1;
                    }
                    if j - i >= 2 {
                        break;
                    }
                }
                buf.push(chars[i]);
                i += 1;
            }
            raw.push((seg_start, buf));
        }
    }

    raw.into_iter()
        .filter_map(|(off, cell_text)| {
            trimmed_segment(&cell_text, line_start + off).map(|seg| Cell {
                extent: (seg.start, seg.end),
                text: seg.text,
            })
        })
        .collect()
}

/// Assigns candidate rows to caption/header/content/footer. The first
/// line is the caption trigger; later single-cell lines before the first
/// multi-cell row continue the caption. A row is numeric-majority when
/// at least half its cells are numeric.
pub fn classify_table_rows(candidates: &[(String, Span)]) -> Table {
    let mut table = Table::default();
    if candidates.is_empty() {
        return table;
    }
    table.extent = (candidates[0].1 .0, candidates[candidates.len() - 1].1 .1);

    let mut seen_multicell = false;
    let mut header_seen = false;
    let mut content_seen = false;
    let mut numeric_majority_seen = false;

    for (idx, (text, extent)) in candidates.iter().enumerate() {
        let cells = split_cells(text, extent.0);
        if cells.is_empty() {
            continue;
        }
        let row = Row {
            extent: *extent,
            cells,
        };
        if idx == 0 {
            table.caption_rows.push(row);
            continue;
        }
        if row.cells.len() >= 2 {
            seen_multicell = true;
        }
        if !seen_multicell && row.cells.len() == 1 && !header_seen && !content_seen {
            table.caption_rows.push(row);
            continue;
        }
        let numeric = row.cells.iter().filter(|c| is_numeric_cell(&c.text)).count();
        let frac = numeric as f64 / row.cells.len() as f64;
        if !content_seen && !numeric_majority_seen && frac < 0.2 {
            header_seen = true;
            table.header_rows.push(row.clone());
        } else if numeric >= 1 || (row.cells.len() >= 2 && header_seen) {
            content_seen = true;
            table.content_rows.push(row.clone());
        } else if row.cells.len() == 1 && content_seen {
            table.footer_rows.push(row.clone());
        } else {
            content_seen = true;
            table.content_rows.push(row.clone());
        }
        if numeric >= 1 && numeric * 2 >= row.cells.len() {
            numeric_majority_seen = true;
        }
    }
    table
}

fn paragraph_from(lines: &[Line], text: &str) -> DocumentElement {
    let start = lines[0].start;
    let end = lines[lines.len() - 1].end;
    DocumentElement::Paragraph(Segment {
        start,
        end,
        text: cp_slice(text, start, end).unwrap().to_string(),
    })
}

/// Classifies a run of lines with no caption trigger into headings,
/// lists, and paragraphs.
fn classify_plain(lines: &[Line], text: &str, out: &mut Vec<DocumentElement>) {
    let mut i = 0usize;
    while i < lines.len() {
        let line = &lines[i];
        if is_heading(&line.text) {
            out.push(DocumentElement::Heading(Segment {
                start: line.start,
                end: line.end,
                text: line.text.clone(),
            }));
            i += 1;
            continue;
        }
        if is_bullet(&line.text) {
            let mut j = i;
            while j < lines.len() && is_bullet(&lines[j].text) {
                j += 1;
            }
            if j - i >= 2 {
                let items: Vec<Segment> = lines[i..j]
                    .iter()
                    .filter_map(|l| {
                        let after = l.text.trim_start();
                        let marker_cp =
                            l.text.chars().count() - after.chars().count() + 1;
                        let item_text: String = l.text.chars().skip(marker_cp).collect();
                        trimmed_segment(&item_text, l.start + marker_cp)
                    })
                    .collect();
                out.push(DocumentElement::List(ListElement {
                    extent: (lines[i].start, lines[j - 1].end),
                    items,
                }));
                i = j;
                continue;
            }
        }
        // paragraph: gather until the next heading or list start
        let para_start = i;
        while i < lines.len() {
            if is_heading(&lines[i].text) {
                break;
            }
            if is_bullet(&lines[i].text)
                && i + 1 < lines.len()
                && is_bullet(&lines[i + 1].text)
            {
                break;
            }
            i += 1;
        }
        out.push(paragraph_from(&lines[para_start..i], text));
    }
}

/// Recovers the element structure of a flat document.
pub fn parse_structure(text: &str) -> StructuredDocument {
    let lines = split_lines(text);
    let mut elements = Vec::new();

    // blocks are maximal runs of non-empty lines; an empty line means
    // two consecutive newlines, the paragraph separator
    let mut block: Vec<Line> = Vec::new();
    let mut blocks: Vec<Vec<Line>> = Vec::new();
    for line in lines {
        if line.text.is_empty() {
            if !block.is_empty() {
                blocks.push(std::mem::take(&mut block));
            }
        } else {
            block.push(line);
        }
    }
    if !block.is_empty() {
        blocks.push(block);
    }

    for block in blocks {
        match block.iter().position(|l| is_caption_trigger(&l.text)) {
            Some(k) => {
                if k > 0 {
                    classify_plain(&block[..k], text, &mut elements);
                }
                let candidates: Vec<(String, Span)> = block[k..]
                    .iter()
                    .map(|l| (l.text.clone(), (l.start, l.end)))
                    .collect();
                elements.push(DocumentElement::Table(classify_table_rows(&candidates)));
            }
            None => classify_plain(&block, text, &mut elements),
        }
    }

    StructuredDocument {
        text: text.to_string(),
        elements,
    }
}

/// Splits a structured document into tagging units.
pub fn split_document(doc: &StructuredDocument, strategy: SplitStrategy) -> Vec<TextUnit> {
    let mut units = Vec::new();
    match strategy {
        SplitStrategy::WholeElement => {
            for (idx, el) in doc.elements.iter().enumerate() {
                let (s, e) = el.extent();
                units.push(TextUnit::new(
                    cp_slice(&doc.text, s, e).unwrap().to_string(),
                    s,
                    UnitOrigin {
                        element: idx,
                        sub_index: None,
                    },
                ));
            }
        }
        SplitStrategy::SubElement => {
            for (idx, el) in doc.elements.iter().enumerate() {
                let mut sub = 0usize;
                let mut push = |units: &mut Vec<TextUnit>, span: Span| {
                    units.push(TextUnit::new(
                        cp_slice(&doc.text, span.0, span.1).unwrap().to_string(),
                        span.0,
                        UnitOrigin {
                            element: idx,
                            sub_index: Some(sub),
                        },
                    ));
                    sub += 1;
                };
                match el {
                    DocumentElement::Heading(seg) | DocumentElement::Paragraph(seg) => {
                        push(&mut units, seg.extent());
                    }
                    DocumentElement::List(list) => {
                        for item in &list.items {
                            push(&mut units, item.extent());
                        }
                    }
                    DocumentElement::Table(table) => {
                        for row in &table.caption_rows {
                            push(&mut units, row.extent);
                        }
                        for row in table.header_rows.iter().chain(&table.content_rows) {
                            for cell in &row.cells {
                                push(&mut units, cell.extent);
                            }
                        }
                        for row in &table.footer_rows {
                            push(&mut units, row.extent);
                        }
                    }
                }
            }
        }
    }
    units
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ElementDump {
    Heading {
        start: usize,
        end: usize,
        text: String,
    },
    Table {
        start: usize,
        end: usize,
        caption: Vec<RowDump>,
        header: Vec<RowDump>,
        content: Vec<RowDump>,
        footer: Vec<RowDump>,
    },
    List {
        start: usize,
        end: usize,
        items: Vec<Segment>,
    },
    Paragraph {
        start: usize,
        end: usize,
        text: String,
    },
}

#[derive(Serialize)]
struct RowDump {
    start: usize,
    end: usize,
    cells: Vec<Segment>,
}

#[derive(Serialize)]
struct StructureDump {
    elements: Vec<ElementDump>,
}

fn row_dump(row: &Row) -> RowDump {
    RowDump {
        start: row.extent.0,
        end: row.extent.1,
        cells: row
            .cells
            .iter()
            .map(|c| Segment {
                start: c.extent.0,
                end: c.extent.1,
                text: c.text.clone(),
            })
            .collect(),
    }
}

/// Renders the element hierarchy as pretty-printed JSON (the `parse`
/// subcommand's output, used for golden-file tests).
pub fn structure_to_json(doc: &StructuredDocument) -> String {
    let elements = doc
        .elements
        .iter()
        .map(|el| match el {
            DocumentElement::Heading(seg) => ElementDump::Heading {
                start: seg.start,
                end: seg.end,
                text: seg.text.clone(),
            },
            DocumentElement::Paragraph(seg) => ElementDump::Paragraph {
                start: seg.start,
                end: seg.end,
                text: seg.text.clone(),
            },
            DocumentElement::List(list) => ElementDump::List {
                start: list.extent.0,
                end: list.extent.1,
                items: list.items.clone(),
            },
            DocumentElement::Table(table) => ElementDump::Table {
                start: table.extent.0,
                end: table.extent.1,
                caption: table.caption_rows.iter().map(row_dump).collect(),
                header: table.header_rows.iter().map(row_dump).collect(),
                content: table.content_rows.iter().map(row_dump).collect(),
                footer: table.footer_rows.iter().map(row_dump).collect(),
            },
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&StructureDump { elements }).unwrap();
    json.push('\n');
    json
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_heading() {
        let text = "5.1     Asthma-Related Death [See Boxed Warning]";
        let doc = parse_structure(text);
        assert_eq!(doc.elements.len(), 1);
        match &doc.elements[0] {
            DocumentElement::Heading(seg) => {
                assert_eq!(seg.text, text);
                assert_eq!(seg.extent(), (0, 48));
            }
            other => panic!("expected heading, got {other:?}"),
        }
    }

    #[test]
    fn heading_requires_dotted_numbering() {
        let doc = parse_structure("10 mg twice daily");
        assert_eq!(doc.elements[0].kind(), ElementKind::Paragraph);
        let doc = parse_structure("6. Adverse Reactions");
        assert_eq!(doc.elements[0].kind(), ElementKind::Heading);
    }

    #[test]
    fn two_bullets_make_a_list() {
        let doc = parse_structure("* nausea\n* headache");
        assert_eq!(doc.elements.len(), 1);
        match &doc.elements[0] {
            DocumentElement::List(list) => {
                assert_eq!(list.items.len(), 2);
                assert_eq!(list.items[0].text, "nausea");
                assert_eq!(list.items[1].text, "headache");
            }
            other => panic!("expected list, got {other:?}"),
        }
    }

    #[test]
    fn single_bullet_is_paragraph() {
        let doc = parse_structure("* nausea");
        assert_eq!(doc.elements.len(), 1);
        assert_eq!(doc.elements[0].kind(), ElementKind::Paragraph);
    }

    #[test]
    fn paragraphs_split_on_blank_lines() {
        let doc = parse_structure("first chunk\nstill first\n\nsecond chunk");
        assert_eq!(doc.elements.len(), 2);
        match &doc.elements[0] {
            DocumentElement::Paragraph(seg) => {
                assert_eq!(seg.text, "first chunk\nstill first")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn table_rows_classified() {
        let text = "Table 1. Adverse events\nReaction\tPlacebo\tDrug\nNausea\t2%\t9%";
        let doc = parse_structure(text);
        assert_eq!(doc.elements.len(), 1);
        match &doc.elements[0] {
            DocumentElement::Table(t) => {
                assert_eq!(t.caption_rows.len(), 1);
                assert_eq!(t.header_rows.len(), 1);
                assert_eq!(t.content_rows.len(), 1);
                assert_eq!(t.footer_rows.len(), 0);
                assert_eq!(t.header_rows[0].cells.len(), 3);
                assert_eq!(t.content_rows[0].cells[1].text, "2%");
            }
            other => panic!("expected table, got {other:?}"),
        }
    }

    #[test]
    fn footer_row_single_column_after_content() {
        let candidates = vec![
            ("Table 2. Something".to_string(), (0, 18)),
            ("A\tB".to_string(), (19, 22)),
            ("1%\t2%".to_string(), (23, 28)),
            ("† reported in long-term studies".to_string(), (29, 60)),
        ];
        let t = classify_table_rows(&candidates);
        assert_eq!(t.footer_rows.len(), 1);
        assert_eq!(t.footer_rows[0].cells.len(), 1);
    }

    #[test]
    fn caption_only_table() {
        let candidates = vec![("Table 3. Empty".to_string(), (0, 14))];
        let t = classify_table_rows(&candidates);
        assert_eq!(t.caption_rows.len(), 1);
        assert!(t.content_rows.is_empty());
    }

    #[test]
    fn multiline_caption_continues_until_multicell() {
        let candidates = vec![
            ("Table 4. Adverse reactions".to_string(), (0, 26)),
            ("reported during trials".to_string(), (27, 49)),
            ("Reaction\tRate".to_string(), (50, 63)),
        ];
        let t = classify_table_rows(&candidates);
        assert_eq!(t.caption_rows.len(), 2);
        assert_eq!(t.header_rows.len(), 1);
    }

    #[test]
    fn space_run_cells() {
        let cells = split_cells("Nausea  2%   9%", 0);
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[0].text, "Nausea");
        assert_eq!(cells[1].extent, (8, 10));
    }

    #[test]
    fn numeric_cell_rule() {
        assert!(is_numeric_cell("2%"));
        assert!(is_numeric_cell("(0.5)"));
        assert!(is_numeric_cell("12 (3%)"));
        assert!(!is_numeric_cell("Nausea"));
        assert!(!is_numeric_cell(""));
    }

    #[test]
    fn whole_element_split_is_identity_for_paragraph() {
        let text = "just a paragraph of text";
        let doc = parse_structure(text);
        let units = split_document(&doc, SplitStrategy::WholeElement);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].text, text);
        assert_eq!(units[0].origin.sub_index, None);
    }

    #[test]
    fn sub_element_split_list_items() {
        let doc = parse_structure("* nausea\n* headache");
        let units = split_document(&doc, SplitStrategy::SubElement);
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].text, "nausea");
        assert_eq!(units[1].text, "headache");
        assert_eq!(units[1].origin.sub_index, Some(1));
    }

    #[test]
    fn sub_element_split_table_cells_and_caption() {
        let text = "Table 1. Events\nNausea\t2%\t9%";
        let doc = parse_structure(text);
        let units = split_document(&doc, SplitStrategy::SubElement);
        // caption row + 3 cells
        assert_eq!(units.len(), 4);
        assert_eq!(units[0].text, "Table 1. Events");
        assert_eq!(units[1].text, "Nausea");
        assert_eq!(units[2].text, "2%");
        assert_eq!(units[3].text, "9%");
    }

    #[test]
    fn unit_offsets_round_trip() {
        let text = "5.1 Overview\n\n* severe rash\n* mild nausea\n\nTable 1. X\nA\tB\n1%\t2%";
        let doc = parse_structure(text);
        for strategy in [SplitStrategy::WholeElement, SplitStrategy::SubElement] {
            for unit in split_document(&doc, strategy) {
                let len = unit.text.chars().count();
                let (s, e) = unit.to_doc_span((0, len));
                assert_eq!(cp_slice(text, s, e).unwrap(), unit.text);
            }
        }
    }

    #[test]
    fn elements_do_not_overlap_and_are_sorted() {
        let text = "1.2 Heading\nnext paragraph line\n\n* a\n* b\n\nTable 1. T\nx\ty";
        let doc = parse_structure(text);
        let extents: Vec<Span> = doc.elements.iter().map(|e| e.extent()).collect();
        for w in extents.windows(2) {
            assert!(w[0].1 <= w[1].0, "overlap: {w:?}");
        }
    }

    #[test]
    fn parse_is_deterministic() {
        let text = "3.1 Hd\n\npara\n\n* x\n* y";
        let a = structure_to_json(&parse_structure(text));
        let b = structure_to_json(&parse_structure(text));
        assert_eq!(a, b);
    }

    #[test]
    fn reparsing_element_concatenation_keeps_kinds() {
        let text = "3.1 Overview\n\nfirst paragraph\n\n* one\n* two\n\nTable 1. T\nA\tB\n1%\t2%";
        let doc = parse_structure(text);
        let joined: Vec<String> = doc
            .elements
            .iter()
            .map(|e| {
                let (s, ee) = e.extent();
                cp_slice(text, s, ee).unwrap().to_string()
            })
            .collect();
        let reparsed = parse_structure(&joined.join("\n\n"));
        let kinds: Vec<ElementKind> = doc.elements.iter().map(|e| e.kind()).collect();
        let rekinds: Vec<ElementKind> = reparsed.elements.iter().map(|e| e.kind()).collect();
        assert_eq!(kinds, rekinds);
    }

    #[test]
    fn mid_block_caption_trigger() {
        let text = "intro line\nTable 1. Caption\nA\tB";
        let doc = parse_structure(text);
        assert_eq!(doc.elements.len(), 2);
        assert_eq!(doc.elements[0].kind(), ElementKind::Paragraph);
        assert_eq!(doc.elements[1].kind(), ElementKind::Table);
    }

    #[test]
    fn project_clips_to_unit() {
        let unit = TextUnit::new("hello", 10, UnitOrigin { element: 0, sub_index: None });
        assert_eq!(unit.project((12, 14), 5), Some((2, 4)));
        assert_eq!(unit.project((0, 9), 5), None);
        assert_eq!(unit.project((8, 12), 5), Some((0, 2)));
    }
}
