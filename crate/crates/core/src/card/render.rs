use std::fmt::Write as _;
use std::str::FromStr;

use super::{CardDocument, CardField, CriterionBlock, FieldContent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardFormat {
    Structured,
    Markdown,
    Html,
}

impl FromStr for CardFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "json" => Ok(CardFormat::Structured),
            "md" | "markdown" => Ok(CardFormat::Markdown),
            "html" => Ok(CardFormat::Html),
            other => Err(Error::Config(format!(
                "unknown card format `{other}` (expected structured, md or html)"
            ))),
        }
    }
}

pub fn render(card: &CardDocument, format: CardFormat) -> String {
    match format {
        CardFormat::Structured => {
            let mut s = serde_json::to_string_pretty(card).expect("card serializes");
            s.push('\n');
            s
        }
        CardFormat::Markdown => markdown(card),
        CardFormat::Html => html(card),
    }
}

pub fn parse_structured(text: &str) -> Result<CardDocument> {
    serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("structured card: {e}")))
}

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}

/// Nested detail lines shown under a criterion field.
fn criterion_details(b: &CriterionBlock) -> Vec<String> {
    let mut out = Vec::new();
    if !b.local.is_empty() {
        let local = b
            .local
            .iter()
            .map(|l| match l.score {
                Some(s) => format!("{} {s:.1} ({})", l.scope, l.verdict),
                None => format!("{} {}", l.scope, l.verdict),
            })
            .collect::<Vec<_>>()
            .join("; ");
        out.push(format!("Local scores: {local}"));
    }
    for e in &b.excluded {
        out.push(format!("Excluded: {} ({})", e.metric, e.reason));
    }
    for d in &b.details {
        out.push(format!("{}: {}", d.field, d.value));
    }
    for n in &b.notes {
        out.push(format!("Note: {n}"));
    }
    out
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn markdown(card: &CardDocument) -> String {
    let mut out = String::new();
    for section in &card.sections {
        let _ = writeln!(out, "# {}. {}\n", section.number, section.title);
        for field in &section.fields {
            let _ = writeln!(out, "- **{}:** {}", field.label, field.content.summary());
            if let FieldContent::Criterion(b) = &field.content {
                for line in criterion_details(b) {
                    let _ = writeln!(out, "  - {line}");
                }
            }
        }
        out.push('\n');
        let blocks: Vec<(&CardField, &CriterionBlock)> = section
            .fields
            .iter()
            .filter_map(|f| match &f.content {
                FieldContent::Criterion(b) => Some((f, b)),
                _ => None,
            })
            .collect();
        if !blocks.is_empty() {
            out.push_str("| Criterion | Metric | Raw value | Normalized | Direction | Verdict |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            for (f, b) in blocks {
                for m in &b.metrics {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} |",
                        f.label,
                        md_cell(&m.metric),
                        md_cell(&m.raw),
                        fmt_score(m.normalized),
                        m.direction,
                        b.verdict
                    );
                }
            }
            out.push('\n');
        }
    }
    out.push_str("---\n\n");
    for n in &card.notes {
        let _ = writeln!(out, "{n}\n");
    }
    out
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;max-width:60rem;margin:2rem auto;padding:0 1rem;line-height:1.4}\
table{border-collapse:collapse;width:100%;margin:0.5rem 0}\
th,td{border:1px solid #ccc;padding:0.3rem 0.5rem;text-align:left;vertical-align:top}\
th[scope=row]{width:14rem;background:#f5f5f5}\
.not-provided{color:#888;font-style:italic}\
footer{margin-top:2rem;font-size:0.9em;color:#444}";

fn html(card: &CardDocument) -> String {
    let name = card
        .field("Name")
        .map(|f| f.content.summary())
        .unwrap_or_default();
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>SMD Card: {}</title>", esc(&name));
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    for section in &card.sections {
        let _ = writeln!(out, "<section>\n<h2>{}. {}</h2>", section.number, esc(&section.title));
        out.push_str("<table>\n");
        for field in &section.fields {
            let _ = write!(out, "<tr><th scope=\"row\">{}</th><td", esc(&field.label));
            match &field.content {
                FieldContent::NotProvided => out.push_str(" class=\"not-provided\">"),
                _ => out.push('>'),
            }
            out.push_str(&esc(&field.content.summary()));
            if let FieldContent::Criterion(b) = &field.content {
                let details = criterion_details(b);
                if !details.is_empty() {
                    out.push_str("<ul>");
                    for d in details {
                        let _ = write!(out, "<li>{}</li>", esc(&d));
                    }
                    out.push_str("</ul>");
                }
            }
            out.push_str("</td></tr>\n");
        }
        out.push_str("</table>\n");
        let rows: Vec<String> = section
            .fields
            .iter()
            .filter_map(|f| match &f.content {
                FieldContent::Criterion(b) => Some((f, b)),
                _ => None,
            })
            .flat_map(|(f, b)| {
                b.metrics.iter().map(move |m| {
                    format!(
                        "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                        esc(&f.label),
                        esc(&m.metric),
                        esc(&m.raw),
                        fmt_score(m.normalized),
                        esc(&m.direction),
                        b.verdict
                    )
                })
            })
            .collect();
        if section.fields.iter().any(|f| matches!(f.content, FieldContent::Criterion(_))) {
            out.push_str("<table>\n<tr>");
            for h in ["Criterion", "Metric", "Raw value", "Normalized", "Direction", "Verdict"] {
                let _ = write!(out, "<th scope=\"col\">{h}</th>");
            }
            out.push_str("</tr>\n");
            for r in rows {
                out.push_str(&r);
                out.push('\n');
            }
            out.push_str("</table>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str("<footer>\n");
    for n in &card.notes {
        let _ = writeln!(out, "<p>{}</p>", esc(n));
    }
    out.push_str("</footer>\n</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::card::{build_card, Manifest};

    fn card() -> CardDocument {
        let m = Manifest::from_toml_str("[general]\nname = \"A <b> & c\"\n").unwrap();
        build_card(&m, None).unwrap()
    }

    #[test]
    fn structured_round_trip() {
        let c = card();
        let text = render(&c, CardFormat::Structured);
        let back = parse_structured(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(render(&back, CardFormat::Structured), text);
    }

    #[test]
    fn html_escapes_and_has_eight_sections() {
        let h = render(&card(), CardFormat::Html);
        assert_eq!(h.matches("<h2>").count(), 8);
        assert!(!h.contains("<h1"));
        assert!(h.contains("A &lt;b&gt; &amp; c"));
    }

    #[test]
    fn markdown_starts_with_section_one() {
        let md = render(&card(), CardFormat::Markdown);
        assert!(md.starts_with("# 1. Synthetic Data General Information\n"));
        assert!(md.contains("- **Biases:** not provided"));
    }
}
