//! Reports as ordered key/value fields, rendered as aligned text or as
//! `key=value` lines for machines.

use pink_forge_core::pink::PinkReport;
use pink_forge_core::ResidueRing;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const VERDICTS: &str = "verified|inconclusive-at-precision|lemma-violation|hypothesis-not-met";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    fields: Vec<(String, String)>,
}

impl Report {
    /// A report opening with the tool version, (ℓ, m, n), the cap and the
    /// verdict taxonomy.
    pub fn new(command: &str, ring: ResidueRing, n: usize, cap: u64) -> Self {
        let mut r = Self::default();
        r.push("tool", format!("pink-forge {VERSION}"));
        r.push("command", command);
        r.push("l", ring.prime());
        r.push("m", ring.precision());
        r.push("n", n);
        r.push("cap", cap);
        r.push("verdicts", VERDICTS);
        r
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            match format {
                Format::Text => out.push_str(&format!("{k}: {v}\n")),
                Format::Machine => out.push_str(&format!("{k}={}\n", v.replace('\n', " "))),
            }
        }
        out
    }

    pub fn add_pink(&mut self, report: &PinkReport) {
        self.push("descriptor", &report.descriptor);
        self.push("k-found", report.k_found.map_or("none".to_string(), |k| k.to_string()));
        self.push("claimed", levels(&report.claimed));
        self.push("conclusion-checked", levels(&report.conclusion_checked));
        for (name, index) in &report.subgroup_indices {
            self.push("index", format!("{name} = {index}"));
        }
        for note in &report.notes {
            self.push("note", note);
        }
        if let Some(cert) = &report.certificate {
            self.push("certificate-claim", &cert.claim);
            self.push("certificate-missing", &cert.missing);
            for g in &cert.generators {
                self.push("certificate-generator", g);
            }
        }
        self.push("verdict", report.verdict);
    }
}

pub fn levels(levels: &[u32]) -> String {
    if levels.is_empty() {
        return "none".into();
    }
    levels.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_formats_keep_field_order() {
        let mut r = Report::new("closure", ResidueRing::new(5, 1).unwrap(), 1, 100);
        r.push("order", 120);
        let text = r.render(Format::Text);
        assert!(text.starts_with(&format!("tool: pink-forge {VERSION}\ncommand: closure\nl: 5\nm: 1\nn: 1\ncap: 100\n")));
        assert!(text.ends_with("order: 120\n"));
        let machine = r.render(Format::Machine);
        assert!(machine.contains("verdicts=verified|inconclusive-at-precision|lemma-violation|hypothesis-not-met\n"));
        assert_eq!(r.get("order"), Some("120"));
    }
}
