//! `{attribute}` placeholder templates.

use crate::model::AttributeName;

/// A value inserted into a filled template, with its char range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub attribute: AttributeName,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filled {
    pub text: String,
    pub slots: Vec<Slot>,
}

impl Filled {
    /// Appends another filled piece, shifting its slots.
    pub fn append(&mut self, sep: &str, other: Filled) {
        if !self.text.is_empty() && !other.text.is_empty() {
            self.text.push_str(sep);
        }
        let base = self.text.chars().count();
        self.text.push_str(&other.text);
        self.slots.extend(other.slots.into_iter().map(|s| Slot {
            start: s.start + base,
            end: s.end + base,
            ..s
        }));
    }

    pub fn push_str(&mut self, s: &str) {
        self.text.push_str(s);
    }
}

/// Placeholder names in order of appearance.
pub fn placeholders(template: &str) -> Vec<AttributeName> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        out.push(AttributeName::new(&rest[open + 1..open + close]));
        rest = &rest[open + close + 1..];
    }
    out
}

/// Substitutes every `{attr}` using `lookup`. Returns the first unresolved
/// attribute on failure.
pub fn fill<F>(template: &str, mut lookup: F) -> Result<Filled, AttributeName>
where
    F: FnMut(&AttributeName) -> Option<String>,
{
    let mut out = Filled::default();
    let mut len = 0;
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        let lit = &rest[..open];
        out.text.push_str(lit);
        len += lit.chars().count();
        let attr = AttributeName::new(&rest[open + 1..open + close]);
        let value = lookup(&attr).ok_or_else(|| attr.clone())?;
        let n = value.chars().count();
        out.text.push_str(&value);
        out.slots.push(Slot {
            attribute: attr,
            value,
            start: len,
            end: len + n,
        });
        len += n;
        rest = &rest[open + close + 1..];
    }
    out.text.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_and_records_char_ranges() {
        let f = fill("Booked {name} for {time}.", |a| match a.as_str() {
            "name" => Some("Jade Café".into()),
            "time" => Some("19:30".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(f.text, "Booked Jade Café for 19:30.");
        assert_eq!((f.slots[0].start, f.slots[0].end), (7, 16));
        assert_eq!((f.slots[1].start, f.slots[1].end), (21, 26));
        assert_eq!(
            placeholders("a {reference num.} b {x}"),
            vec!["reference num.".into(), "x".into()]
        );
    }

    #[test]
    fn missing_attribute_is_reported() {
        assert_eq!(
            fill("{address}", |_| None),
            Err(AttributeName::from("address"))
        );
    }

    #[test]
    fn append_shifts_slots() {
        let mut a = fill("{x}.", |_| Some("ab".into())).unwrap();
        let b = fill("Then {y}.", |_| Some("cd".into())).unwrap();
        a.append(" ", b);
        assert_eq!(a.text, "ab. Then cd.");
        assert_eq!((a.slots[1].start, a.slots[1].end), (9, 11));
    }
}
