//! Single-pass `{name}` placeholder substitution.
//!
//! Only the named placeholders are replaced; every other brace is literal.
//! Substituted values are never rescanned, so a problem statement that
//! happens to contain `{sol}` is inserted verbatim.

pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in vars {
            let needle_len = name.len() + 2;
            if tail.len() >= needle_len
                && tail.as_bytes()[needle_len - 1] == b'}'
                && &tail[1..needle_len - 1] == *name
            {
                out.push_str(value);
                rest = &tail[needle_len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::fill;

    #[test]
    fn replaces_known_placeholders_only() {
        assert_eq!(
            fill("{a} and {b} but not {c} or {", &[("a", "1"), ("b", "2")]),
            "1 and 2 but not {c} or {"
        );
    }

    #[test]
    fn values_are_not_rescanned() {
        assert_eq!(fill("{pb}|{sol}", &[("pb", "{sol}"), ("sol", "x")]), "{sol}|x");
    }

    #[test]
    fn multibyte_text_around_braces() {
        assert_eq!(fill("→{x}←{", &[("x", "é")]), "→é←{");
    }
}
