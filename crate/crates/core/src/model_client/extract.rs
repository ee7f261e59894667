const FENCE: &str = "```";

/// Reduce a model completion to one SQL statement: take the first fenced
/// block if there is one, drop its language tag, cut at the first `;` outside
/// quotes, and trim.
pub fn extract_sql(completion: &str) -> String {
    let parts: Vec<&str> = completion.split(FENCE).collect();
    let body = match parts.len() {
        1 => parts[0],
        2 => {
            // A lone fence: keep whichever side has content.
            if parts[0].trim().is_empty() {
                strip_language_tag(parts[1])
            } else {
                parts[0]
            }
        }
        _ => strip_language_tag(parts[1]),
    };
    first_statement(body).trim().to_string()
}

fn strip_language_tag(block: &str) -> &str {
    match block.split_once('\n') {
        Some((first, rest)) if first.trim().chars().all(|c| c.is_ascii_alphanumeric() || "_+-".contains(c)) => rest,
        _ => block,
    }
}

fn first_statement(sql: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in sql.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' | '`' => quote = Some(c),
                '[' => quote = Some(']'),
                ';' => return &sql[..i],
                _ => {}
            },
        }
    }
    sql
}
