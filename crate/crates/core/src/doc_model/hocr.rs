//! hOCR (XHTML) parser producing the five-level layout tree.
//!
//! Recognized classes: `ocr_page`, `ocr_carea`, `ocr_par`, `ocr_line`,
//! `ocrx_word`, mapped to page/column/paragraph/line/word. Other elements are
//! transparent containers. Missing intermediate levels are synthesized as
//! single-child nodes so the five-level shape always holds. Words without a
//! usable bbox or transcription are skipped and counted.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{
    BBox, ColumnNode, Document, Element, LayoutTree, LineNode, PageNode, ParagraphNode,
    TextElement, WordNode,
};
use crate::error::{Error, Result};

/// Parse outcome: the document plus the number of skipped word elements.
#[derive(Debug)]
pub struct ParsedHocr {
    pub document: Document,
    pub skipped_words: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Page,
    Column,
    Paragraph,
    Line,
    Word,
}

#[derive(Debug)]
enum Builder {
    Page { bbox: Option<BBox>, columns: Vec<ColumnNode> },
    Column { bbox: Option<BBox>, synthetic: bool, paragraphs: Vec<ParagraphNode> },
    Paragraph { bbox: Option<BBox>, synthetic: bool, lines: Vec<LineNode> },
    Line { bbox: Option<BBox>, synthetic: bool, words: Vec<WordNode> },
    Word { bbox: Option<BBox>, text: String },
}

impl Builder {
    fn kind(&self) -> NodeKind {
        match self {
            Builder::Page { .. } => NodeKind::Page,
            Builder::Column { .. } => NodeKind::Column,
            Builder::Paragraph { .. } => NodeKind::Paragraph,
            Builder::Line { .. } => NodeKind::Line,
            Builder::Word { .. } => NodeKind::Word,
        }
    }

    fn is_synthetic(&self) -> bool {
        matches!(
            self,
            Builder::Column { synthetic: true, .. }
                | Builder::Paragraph { synthetic: true, .. }
                | Builder::Line { synthetic: true, .. }
        )
    }
}

/// What a single XML element contributed, recorded so its end event can be
/// routed back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opened {
    Structural(NodeKind),
    Title,
    Transparent,
}

struct HocrBuilder {
    stack: Vec<Builder>,
    xml: Vec<Opened>,
    pages: Vec<PageNode>,
    elements: Vec<Element>,
    skipped_words: usize,
    title: String,
    in_title: bool,
    saw_page: bool,
    first_image: Option<String>,
}

impl HocrBuilder {
    fn new() -> Self {
        HocrBuilder {
            stack: Vec::new(),
            xml: Vec::new(),
            pages: Vec::new(),
            elements: Vec::new(),
            skipped_words: 0,
            title: String::new(),
            in_title: false,
            saw_page: false,
            first_image: None,
        }
    }

    fn in_page(&self) -> bool {
        !self.stack.is_empty()
    }

    fn in_word(&self) -> bool {
        matches!(self.stack.last(), Some(Builder::Word { .. }))
    }

    fn top_kind(&self) -> Option<NodeKind> {
        self.stack.last().map(Builder::kind)
    }

    /// Open synthetic ancestors until the stack top can accept `child`.
    fn ensure_parent(&mut self, child: NodeKind) {
        let wanted = match child {
            NodeKind::Column => NodeKind::Page,
            NodeKind::Paragraph => NodeKind::Column,
            NodeKind::Line => NodeKind::Paragraph,
            NodeKind::Word => NodeKind::Line,
            NodeKind::Page => return,
        };
        if self.top_kind() == Some(wanted) {
            return;
        }
        self.ensure_parent(wanted);
        let synth = match wanted {
            NodeKind::Column => Builder::Column { bbox: None, synthetic: true, paragraphs: vec![] },
            NodeKind::Paragraph => {
                Builder::Paragraph { bbox: None, synthetic: true, lines: vec![] }
            }
            NodeKind::Line => Builder::Line { bbox: None, synthetic: true, words: vec![] },
            NodeKind::Page | NodeKind::Word => unreachable!(),
        };
        self.stack.push(synth);
    }

    fn open(&mut self, kind: NodeKind, bbox: Option<BBox>, image: Option<String>) -> Result<bool> {
        if kind == NodeKind::Page {
            if self.in_page() {
                return Err(Error::Hocr("nested ocr_page".into()));
            }
            self.saw_page = true;
            if self.first_image.is_none() {
                self.first_image = image;
            }
            self.stack.push(Builder::Page { bbox, columns: vec![] });
            return Ok(true);
        }
        // Structural elements outside any page are ignored.
        if !self.in_page() {
            if kind == NodeKind::Word {
                self.skipped_words += 1;
            }
            return Ok(false);
        }
        if self.in_word() {
            return Err(Error::Hocr("structural element nested inside ocrx_word".into()));
        }
        self.ensure_parent(kind);
        let builder = match kind {
            NodeKind::Column => Builder::Column { bbox, synthetic: false, paragraphs: vec![] },
            NodeKind::Paragraph => Builder::Paragraph { bbox, synthetic: false, lines: vec![] },
            NodeKind::Line => Builder::Line { bbox, synthetic: false, words: vec![] },
            NodeKind::Word => Builder::Word { bbox, text: String::new() },
            NodeKind::Page => unreachable!(),
        };
        self.stack.push(builder);
        Ok(true)
    }

    /// Close the structural node on top of the stack, attaching it to its
    /// parent. Synthetic parents close together with their single child.
    fn close(&mut self, expected: NodeKind) -> Result<()> {
        let top = self
            .stack
            .pop()
            .ok_or_else(|| Error::Hocr("unbalanced hOCR structure".into()))?;
        if top.kind() != expected {
            return Err(Error::Hocr(format!(
                "expected to close {:?}, found {:?}",
                expected,
                top.kind()
            )));
        }
        match top {
            Builder::Word { bbox, text } => {
                let text = text.trim().to_string();
                let keep = match bbox {
                    Some(b) if !text.is_empty() && b.width() > 0 && b.height() > 0 => Some(b),
                    _ => None,
                };
                match keep {
                    Some(b) => {
                        let element = self.elements.len();
                        self.elements.push(Element::Text(TextElement {
                            text,
                            x: b.x0,
                            y: b.y0,
                            w: b.width(),
                            h: b.height(),
                        }));
                        match self.stack.last_mut() {
                            Some(Builder::Line { words, .. }) => words.push(WordNode { element }),
                            _ => return Err(Error::Hocr("word closed outside a line".into())),
                        }
                    }
                    None => self.skipped_words += 1,
                }
            }
            Builder::Line { bbox, words, .. } => {
                if words.is_empty() && bbox.is_none() {
                    // Nothing to place and no declared extent; drop it.
                } else {
                    let bbox = match bbox {
                        Some(b) => b,
                        None => self.union_words(&words)?,
                    };
                    match self.stack.last_mut() {
                        Some(Builder::Paragraph { lines, .. }) => {
                            lines.push(LineNode { bbox, words })
                        }
                        _ => return Err(Error::Hocr("line closed outside a paragraph".into())),
                    }
                }
            }
            Builder::Paragraph { bbox, lines, .. } => {
                if lines.is_empty() && bbox.is_none() {
                } else {
                    let bbox = match bbox {
                        Some(b) => b,
                        None => union_bboxes(lines.iter().map(|l| l.bbox))
                            .ok_or_else(|| Error::Hocr("paragraph without extent".into()))?,
                    };
                    match self.stack.last_mut() {
                        Some(Builder::Column { paragraphs, .. }) => {
                            paragraphs.push(ParagraphNode { bbox, lines })
                        }
                        _ => return Err(Error::Hocr("paragraph closed outside a column".into())),
                    }
                }
            }
            Builder::Column { bbox, paragraphs, .. } => {
                if paragraphs.is_empty() && bbox.is_none() {
                } else {
                    let bbox = match bbox {
                        Some(b) => b,
                        None => union_bboxes(paragraphs.iter().map(|p| p.bbox))
                            .ok_or_else(|| Error::Hocr("column without extent".into()))?,
                    };
                    match self.stack.last_mut() {
                        Some(Builder::Page { columns, .. }) => {
                            columns.push(ColumnNode { bbox, paragraphs })
                        }
                        _ => return Err(Error::Hocr("column closed outside a page".into())),
                    }
                }
            }
            Builder::Page { bbox, columns } => {
                if columns.is_empty() && bbox.is_none() {
                } else {
                    let bbox = match bbox {
                        Some(b) => b,
                        None => union_bboxes(columns.iter().map(|c| c.bbox))
                            .ok_or_else(|| Error::Hocr("page without extent".into()))?,
                    };
                    self.pages.push(PageNode { bbox, columns });
                }
            }
        }
        // A synthetic wrapper holds exactly one real child; close it now.
        if self.stack.last().is_some_and(Builder::is_synthetic) {
            let kind = self.top_kind().expect("synthetic node present");
            self.close(kind)?;
        }
        Ok(())
    }

    fn union_words(&self, words: &[WordNode]) -> Result<BBox> {
        union_bboxes(words.iter().map(|w| match &self.elements[w.element] {
            Element::Text(t) => t.bbox(),
            Element::Image(i) => i.bbox(),
        }))
        .ok_or_else(|| Error::Hocr("line without extent".into()))
    }

    fn push_text(&mut self, text: &str) {
        if self.in_title {
            self.title.push_str(text);
        } else if let Some(Builder::Word { text: buf, .. }) = self.stack.last_mut() {
            buf.push_str(text);
        }
    }
}

fn union_bboxes(mut it: impl Iterator<Item = BBox>) -> Option<BBox> {
    let first = it.next()?;
    Some(it.fold(first, |acc, b| acc.union(&b)))
}

fn classify(start: &BytesStart) -> Result<Option<NodeKind>> {
    let Some(attr) = start
        .try_get_attribute("class")
        .map_err(|e| Error::Hocr(e.to_string()))?
    else {
        return Ok(None);
    };
    let value = attr.unescape_value().map_err(|e| Error::Hocr(e.to_string()))?;
    for class in value.split_whitespace() {
        let kind = match class {
            "ocr_page" => Some(NodeKind::Page),
            "ocr_carea" => Some(NodeKind::Column),
            "ocr_par" => Some(NodeKind::Paragraph),
            "ocr_line" => Some(NodeKind::Line),
            "ocrx_word" => Some(NodeKind::Word),
            _ => None,
        };
        if kind.is_some() {
            return Ok(kind);
        }
    }
    Ok(None)
}

/// Pull `bbox` and `image` properties out of an hOCR `title` attribute.
fn parse_title(start: &BytesStart) -> Result<(Option<BBox>, Option<String>)> {
    let Some(attr) = start
        .try_get_attribute("title")
        .map_err(|e| Error::Hocr(e.to_string()))?
    else {
        return Ok((None, None));
    };
    let value = attr.unescape_value().map_err(|e| Error::Hocr(e.to_string()))?;
    let mut bbox = None;
    let mut image = None;
    for segment in value.split(';') {
        let segment = segment.trim();
        if let Some(rest) = segment.strip_prefix("bbox ") {
            let coords: Vec<u32> = rest
                .split_whitespace()
                .map_while(|t| t.parse::<u32>().ok())
                .collect();
            if coords.len() == 4 {
                if let Ok(b) = BBox::new(coords[0], coords[1], coords[2], coords[3]) {
                    bbox = Some(b);
                }
            }
        } else if let Some(rest) = segment.strip_prefix("image ") {
            image = Some(rest.trim().trim_matches('"').to_string());
        }
    }
    Ok((bbox, image))
}

fn resolve_entity(name: &str) -> Result<String> {
    let ch = match name {
        "lt" => '<',
        "gt" => '>',
        "amp" => '&',
        "apos" => '\'',
        "quot" => '"',
        _ => {
            let r = quick_xml::events::BytesRef::new(name)
                .resolve_char_ref()
                .map_err(|e| Error::Hocr(e.to_string()))?;
            r.ok_or_else(|| Error::Hocr(format!("unknown entity &{name};")))?
        }
    };
    Ok(ch.to_string())
}

/// Parse hOCR bytes into a [`Document`].
///
/// The layout tree mirrors the hOCR nesting with bboxes converted from
/// `(x0, y0, x1, y1)` to `(x, y, w, h)`. Malformed markup is an error; words
/// without a usable bbox or transcription are skipped and counted in
/// [`ParsedHocr::skipped_words`].
pub fn parse_hocr(html_bytes: &[u8]) -> Result<ParsedHocr> {
    let mut reader = Reader::from_reader(html_bytes);
    let mut state = HocrBuilder::new();
    let mut buf = Vec::new();
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Hocr(format!("malformed hOCR: {e}")))?;
        match event {
            Event::Start(e) => {
                let opened = start_element(&mut state, &e)?;
                state.xml.push(opened);
            }
            Event::Empty(e) => {
                let opened = start_element(&mut state, &e)?;
                end_element(&mut state, opened)?;
            }
            Event::End(_) => {
                let opened = state
                    .xml
                    .pop()
                    .ok_or_else(|| Error::Hocr("unbalanced closing tag".into()))?;
                end_element(&mut state, opened)?;
            }
            Event::Text(t) => {
                let text = t.decode().map_err(|e| Error::Hocr(e.to_string()))?;
                state.push_text(&text);
            }
            Event::CData(c) => {
                let text = c.decode().map_err(|e| Error::Hocr(e.to_string()))?;
                state.push_text(&text);
            }
            Event::GeneralRef(r) => {
                let name = r.decode().map_err(|e| Error::Hocr(e.to_string()))?;
                let resolved = resolve_entity(&name)?;
                state.push_text(&resolved);
            }
            Event::Decl(_) | Event::DocType(_) | Event::Comment(_) | Event::PI(_) => {}
            Event::Eof => break,
        }
        buf.clear();
    }
    if !state.xml.is_empty() || !state.stack.is_empty() {
        return Err(Error::Hocr("unexpected end of input with open elements".into()));
    }
    if !state.saw_page {
        return Err(Error::Hocr("no ocr_page element found".into()));
    }

    let doc_id = {
        let from_title = state.title.trim().to_string();
        if !from_title.is_empty() {
            from_title
        } else {
            state
                .first_image
                .as_deref()
                .and_then(|p| std::path::Path::new(p).file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        }
    };
    let document = Document {
        doc_id,
        elements: state.elements,
        layout: LayoutTree { pages: state.pages },
        image_ref: state.first_image,
    };
    document.validate()?;
    Ok(ParsedHocr { document, skipped_words: state.skipped_words })
}

fn start_element(state: &mut HocrBuilder, e: &BytesStart) -> Result<Opened> {
    if e.name().as_ref() == b"title" && !state.in_page() {
        state.in_title = true;
        return Ok(Opened::Title);
    }
    match classify(e)? {
        Some(kind) => {
            let (bbox, image) = parse_title(e)?;
            if state.open(kind, bbox, image)? {
                Ok(Opened::Structural(kind))
            } else {
                Ok(Opened::Transparent)
            }
        }
        None => Ok(Opened::Transparent),
    }
}

fn end_element(state: &mut HocrBuilder, opened: Opened) -> Result<()> {
    match opened {
        Opened::Structural(kind) => state.close(kind),
        Opened::Title => {
            state.in_title = false;
            Ok(())
        }
        Opened::Transparent => Ok(()),
    }
}
