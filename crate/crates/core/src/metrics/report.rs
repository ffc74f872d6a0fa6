use std::fmt;

/// Aligned-column plain-text table. Numeric-looking cells are right-aligned.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        self.rows.push(cells);
        self
    }

    pub fn extend(&mut self, other: &TextTable) {
        self.rows.extend(other.rows.iter().cloned());
    }
}

fn numeric(s: &str) -> bool {
    s.parse::<f64>().is_ok() || s == "-" || s == "inf"
}

impl fmt::Display for TextTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.header.len();
        let mut w: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate().take(cols) {
                w[i] = w[i].max(c.chars().count());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, cells: &[String], header: bool| -> fmt::Result {
            let mut parts = Vec::with_capacity(cols);
            for i in 0..cols {
                let c = cells.get(i).map_or("", |s| s.as_str());
                if !header && numeric(c) {
                    parts.push(format!("{c:>width$}", width = w[i]));
                } else {
                    parts.push(format!("{c:<width$}", width = w[i]));
                }
            }
            writeln!(f, "{}", parts.join("  ").trim_end())
        };
        line(f, &self.header, true)?;
        let rule: Vec<String> = w.iter().map(|&n| "-".repeat(n)).collect();
        writeln!(f, "{}", rule.join("  "))?;
        for r in &self.rows {
            line(f, r, false)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let mut t = TextTable::new(&["name", "value"]);
        t.row(vec!["a".into(), "1.5".into()]).row(vec!["longer".into(), "12.25".into()]);
        let s = t.to_string();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "name    value");
        assert_eq!(lines[2], "a         1.5");
        assert_eq!(lines[3], "longer  12.25");
    }
}
