//! Turn raw HTML into normalized text and an absolute link list.
//!
//! Text is the visible content only: script, style, noscript, template, head
//! and comment nodes are dropped, as are elements with a `hidden` attribute
//! or an inline `display:none`. The CSS cascade is not evaluated. Every tag
//! boundary becomes a word boundary, whitespace runs collapse to single
//! spaces, and the result is lowercased.

use scraper::node::Node;
use scraper::{Html, Selector};

use crate::fetch::normalize_url;
use crate::model::{normalize_phrase, Link};

pub struct Extracted {
    pub text: String,
    pub links: Vec<Link>,
    pub phone_numbers: Vec<String>,
}

/// Decode and extract visible text, normalized for matching.
pub fn extract_text(body: &[u8], content_type: &str) -> String {
    let decoded = decode(body, content_type);
    if is_plain_text(content_type) {
        return normalize_phrase(&strip_markup_remnants(&decoded));
    }
    let doc = Html::parse_document(&decoded);
    let mut raw = String::new();
    collect_text(doc.tree.root(), &mut raw);
    normalize_phrase(&strip_markup_remnants(&raw))
}

/// Resolve, normalize, and deduplicate anchor hrefs against `base`.
/// mailto/javascript/data links are dropped; tel: numbers are returned
/// separately.
pub fn extract_links(body: &[u8], content_type: &str, base: &str) -> (Vec<Link>, Vec<String>) {
    if is_plain_text(content_type) {
        return (Vec::new(), Vec::new());
    }
    let decoded = decode(body, content_type);
    let doc = Html::parse_document(&decoded);
    links_from_document(&doc, base)
}

/// Single decode and parse for callers that need both text and links.
pub fn extract_page(body: &[u8], content_type: &str, base: &str) -> Extracted {
    let decoded = decode(body, content_type);
    if is_plain_text(content_type) {
        return Extracted {
            text: normalize_phrase(&decoded),
            links: Vec::new(),
            phone_numbers: Vec::new(),
        };
    }
    let doc = Html::parse_document(&decoded);
    let mut raw = String::new();
    collect_text(doc.tree.root(), &mut raw);
    let (links, phone_numbers) = links_from_document(&doc, base);
    Extracted {
        text: normalize_phrase(&strip_markup_remnants(&raw)),
        links,
        phone_numbers,
    }
}

fn is_plain_text(content_type: &str) -> bool {
    content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .eq_ignore_ascii_case("text/plain")
}

fn links_from_document(doc: &Html, base: &str) -> (Vec<Link>, Vec<String>) {
    let selector = Selector::parse("a[href]").expect("static selector");
    let base_url = url::Url::parse(base).ok();
    let mut links: Vec<Link> = Vec::new();
    let mut phones: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for anchor in doc.select(&selector) {
        let href = anchor.value().attr("href").unwrap_or("").trim();
        if href.is_empty() {
            continue;
        }
        let scheme_probe = href.to_ascii_lowercase();
        if scheme_probe.starts_with("mailto:")
            || scheme_probe.starts_with("javascript:")
            || scheme_probe.starts_with("data:")
        {
            continue;
        }
        if let Some(number) = scheme_probe.strip_prefix("tel:") {
            let number = number.trim();
            if !number.is_empty() {
                phones.push(number.to_string());
            }
            continue;
        }
        let Some(base_url) = base_url.as_ref() else {
            continue;
        };
        let Ok(joined) = base_url.join(href) else {
            continue;
        };
        let Ok(normalized) = normalize_url(joined.as_str()) else {
            continue;
        };
        if !seen.insert(normalized.clone()) {
            continue;
        }
        let anchor_text = normalize_phrase(&anchor.text().collect::<Vec<_>>().join(" "));
        links.push(Link {
            url: normalized,
            anchor_text,
        });
    }
    (links, phones)
}

fn collect_text(node: ego_tree::NodeRef<'_, Node>, out: &mut String) {
    for child in node.children() {
        match child.value() {
            Node::Text(text) => {
                out.push(' ');
                out.push_str(text);
            }
            Node::Element(element) => {
                if skip_element(element) {
                    continue;
                }
                collect_text(child, out);
            }
            _ => {}
        }
    }
}

fn skip_element(element: &scraper::node::Element) -> bool {
    matches!(
        element.name(),
        "script"
            | "style"
            | "noscript"
            | "template"
            | "head"
            | "title"
            | "textarea"
            | "xmp"
            | "iframe"
            | "noembed"
            | "noframes"
            | "plaintext"
    ) || element.attr("hidden").is_some()
        || element.attr("style").is_some_and(is_inline_display_none)
}

/// Decoded entities like `&lt;b` would reintroduce markup-looking text, so a
/// `<` directly before an ASCII letter becomes a space.
fn strip_markup_remnants(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '<' && chars.peek().is_some_and(|n| n.is_ascii_alphabetic()) {
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out
}

fn is_inline_display_none(style: &str) -> bool {
    let compact: String = style
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    compact.contains("display:none")
}

/// Charset resolution order: Content-Type header parameter, then a meta tag
/// in the first kilobyte, then UTF-8 with replacement.
fn decode(body: &[u8], content_type: &str) -> String {
    let label = charset_from_content_type(content_type)
        .or_else(|| charset_from_meta(&body[..body.len().min(1024)]));
    let encoding = label
        .and_then(|l| encoding_rs::Encoding::for_label(l.as_bytes()))
        .unwrap_or(encoding_rs::UTF_8);
    let (decoded, _, _) = encoding.decode(body);
    decoded.into_owned()
}

fn charset_from_content_type(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|param| {
        let (key, value) = param.split_once('=')?;
        if key.trim().eq_ignore_ascii_case("charset") {
            Some(value.trim().trim_matches('"').to_string())
        } else {
            None
        }
    })
}

fn charset_from_meta(head: &[u8]) -> Option<String> {
    let window = String::from_utf8_lossy(head).to_ascii_lowercase();
    let at = window.find("charset=")?;
    let rest = &window[at + "charset=".len()..];
    let value: String = rest
        .trim_start_matches(['"', '\''])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
        .collect();
    if value.is_empty() {
        None
    } else {
        Some(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_markup_and_collapses_whitespace() {
        let html = b"<p>Do Not <b>Sell</b>  my info</p>";
        assert_eq!(extract_text(html, "text/html"), "do not sell my info");
    }

    #[test]
    fn script_and_style_content_is_dropped() {
        assert_eq!(
            extract_text(b"<script>x=1</script><p>hi</p>", "text/html"),
            "hi"
        );
        assert_eq!(
            extract_text(b"<style>p{}</style><p>hi</p>", "text/html"),
            "hi"
        );
        assert_eq!(extract_text(b"<!-- secret --><p>hi</p>", "text/html"), "hi");
    }

    #[test]
    fn hidden_elements_are_dropped() {
        let html = b"<div hidden>gone</div><div style=\"display: none\">also gone</div><p>kept</p>";
        assert_eq!(extract_text(html, "text/html"), "kept");
    }

    #[test]
    fn head_and_title_are_not_page_text() {
        let html = b"<html><head><title>Privacy</title></head><body><p>body text</p></body></html>";
        assert_eq!(extract_text(html, "text/html"), "body text");
    }

    #[test]
    fn entities_decode() {
        assert_eq!(
            extract_text(b"<p>Ben &amp; Jerry&#39;s</p>", "text/html"),
            "ben & jerry's"
        );
    }

    #[test]
    fn plain_text_passes_through_normalized() {
        assert_eq!(
            extract_text(b"Plain  TEXT\nbody", "text/plain; charset=utf-8"),
            "plain text body"
        );
    }

    #[test]
    fn charset_header_wins_over_utf8() {
        // "café" in ISO-8859-1: caf\xe9
        let body = b"<p>caf\xe9</p>";
        assert_eq!(
            extract_text(body, "text/html; charset=iso-8859-1"),
            "caf\u{e9}"
        );
    }

    #[test]
    fn charset_meta_is_sniffed() {
        let body = b"<html><head><meta charset=\"iso-8859-1\"></head><body>caf\xe9</body></html>";
        assert_eq!(extract_text(body, "text/html"), "caf\u{e9}");
    }

    #[test]
    fn relative_hrefs_resolve_against_base() {
        let html = b"<a href=\"/privacy\">Privacy Policy</a>";
        let (links, _) = extract_links(html, "text/html", "https://a.com/x/");
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].url, "https://a.com/privacy");
        assert_eq!(links[0].anchor_text, "privacy policy");
    }

    #[test]
    fn duplicate_hrefs_keep_first_anchor_text() {
        let html = b"<a href=\"/p\">first</a><a href=\"/p\">second</a>";
        let (links, _) = extract_links(html, "text/html", "https://a.com/");
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].anchor_text, "first");
    }

    #[test]
    fn tel_links_become_phone_numbers() {
        let html = b"<a href=\"tel:1-800-555-0100\">Call</a><a href=\"/x\">x</a>";
        let (links, phones) = extract_links(html, "text/html", "https://a.com/");
        assert_eq!(phones, vec!["1-800-555-0100".to_string()]);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].url, "https://a.com/x");
    }

    #[test]
    fn mailto_and_javascript_are_dropped() {
        let html = b"<a href=\"mailto:a@b.c\">m</a><a href=\"javascript:void(0)\">j</a>";
        let (links, phones) = extract_links(html, "text/html", "https://a.com/");
        assert!(links.is_empty());
        assert!(phones.is_empty());
    }

    #[test]
    fn links_normalize_idempotently() {
        let html = b"<a href=\"HTTP://A.COM:80/b/../c#frag\">x</a>";
        let (links, _) = extract_links(html, "text/html", "https://a.com/");
        assert_eq!(links[0].url, "http://a.com/c");
        assert_eq!(normalize_url(&links[0].url).unwrap(), links[0].url);
    }

    proptest! {
        // No '<' followed by an ASCII letter may survive extraction.
        #[test]
        fn no_markup_survives(input in ".{0,400}") {
            let text = extract_text(input.as_bytes(), "text/html");
            let bytes = text.as_bytes();
            for window in bytes.windows(2) {
                prop_assert!(
                    !(window[0] == b'<' && window[1].is_ascii_alphabetic()),
                    "markup leaked in {text:?}"
                );
            }
        }
    }
}
