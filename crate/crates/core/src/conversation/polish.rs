/// Optional sentence rewriter applied to generated text. Builds are
/// deterministic only with the identity rewriter.
pub trait Polisher: Sync {
    fn polish(&self, text: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPolisher;

impl Polisher for IdentityPolisher {
    fn polish(&self, text: &str) -> String {
        text.to_string()
    }
}

impl<F: Fn(&str) -> String + Sync> Polisher for F {
    fn polish(&self, text: &str) -> String {
        self(text)
    }
}

/// Runs `polisher` on `text` and keeps the rewrite only if every token
/// stream and every `protected` substring survives byte-for-byte.
/// Otherwise logs a warning and returns the original.
pub fn polish_hook(polisher: &dyn Polisher, text: &str, protected: &[&str]) -> String {
    let rewritten = polisher.polish(text);
    if rewritten == text {
        return rewritten;
    }
    let streams = embedded_streams(text);
    if embedded_streams(&rewritten) != streams {
        log::warn!("polish rejected: token stream altered in {text:?}");
        return text.to_string();
    }
    if let Some(lost) = protected.iter().find(|p| !p.is_empty() && !rewritten.contains(*p)) {
        log::warn!("polish rejected: substitution {lost:?} removed from {text:?}");
        return text.to_string();
    }
    rewritten
}

/// Every `<hand:...` .. `</grasp>` span, in order.
pub(crate) fn embedded_streams(text: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<hand:") {
        let tail = &rest[start..];
        match tail.find("</grasp>") {
            Some(end) => {
                spans.push(&tail[..end + "</grasp>".len()]);
                rest = &tail[end + "</grasp>".len()..];
            }
            None => {
                spans.push(tail);
                break;
            }
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANSWER: &str = "<hand:allegro> <scale:3> <grasp> <bin:1> <bin:2> </grasp> Thumb contacts the rim.";

    #[test]
    fn identity_is_unchanged() {
        assert_eq!(polish_hook(&IdentityPolisher, ANSWER, &[]), ANSWER);
    }

    #[test]
    fn mutated_bin_is_rejected() {
        let bad = |t: &str| t.replace("<bin:2>", "<bin:7>");
        assert_eq!(polish_hook(&bad, ANSWER, &[]), ANSWER);
        let dropped = |t: &str| t.replace("</grasp>", "");
        assert_eq!(polish_hook(&dropped, ANSWER, &[]), ANSWER);
    }

    #[test]
    fn rewording_is_accepted_when_protected_text_survives() {
        let q = "How do you grasp the glass using the Shadow Hand?";
        let reword = |t: &str| t.replace("How do you grasp", "What is the best way to hold");
        let out = polish_hook(&reword, q, &["glass", "Shadow Hand"]);
        assert_eq!(out, "What is the best way to hold the glass using the Shadow Hand?");
        let drop_hand = |t: &str| t.replace("Shadow Hand", "hand");
        assert_eq!(polish_hook(&drop_hand, q, &["glass", "Shadow Hand"]), q);
    }

    #[test]
    fn commentary_rewrite_keeps_stream() {
        let reword = |t: &str| t.replace("Thumb contacts", "The thumb touches");
        assert!(polish_hook(&reword, ANSWER, &[]).ends_with("The thumb touches the rim."));
    }
}
