use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContactError, ContactRecord};

const CANONICAL_FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "little"];
pub const PALM: &str = "palm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMode {
    /// Every contacting finger touches the same part.
    General,
    /// Fingers touch different parts; one clause per part.
    Detailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerPart {
    pub finger: String,
    pub part: String,
}

/// Text description of a grasp's contacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSummary {
    pub mode: SummaryMode,
    pub object: String,
    /// Contacting participants in canonical order, palm last.
    pub fingers: Vec<String>,
    pub finger_parts: Vec<FingerPart>,
    /// The shared part, in general mode.
    pub part: Option<String>,
    /// Contacting fingers excluding the palm.
    pub finger_count: usize,
    pub text: String,
}

/// Sort key placing thumb..little first, other names alphabetically, palm last.
pub fn finger_order(name: &str) -> (usize, &str) {
    match CANONICAL_FINGERS.iter().position(|f| *f == name) {
        Some(i) => (i, ""),
        None if name == PALM => (CANONICAL_FINGERS.len() + 1, ""),
        None => (CANONICAL_FINGERS.len(), name),
    }
}

impl ContactSummary {
    /// Builds the summary from (finger, part) pairs; order of input is
    /// irrelevant.
    pub fn from_finger_parts(object: &str, pairs: impl IntoIterator<Item = FingerPart>) -> Result<Self, ContactError> {
        let mut finger_parts: Vec<FingerPart> = pairs.into_iter().collect();
        if finger_parts.is_empty() {
            return Err(ContactError::NoContact);
        }
        finger_parts.sort_by(|a, b| finger_order(&a.finger).cmp(&finger_order(&b.finger)));
        finger_parts.dedup_by(|a, b| a.finger == b.finger);

        let mut parts: Vec<&str> = finger_parts.iter().map(|fp| fp.part.as_str()).collect();
        parts.sort_unstable();
        parts.dedup();
        let mode = if parts.len() == 1 { SummaryMode::General } else { SummaryMode::Detailed };
        let part = (mode == SummaryMode::General).then(|| parts[0].to_string());

        let mut summary = ContactSummary {
            mode,
            object: object.to_string(),
            fingers: finger_parts.iter().map(|fp| fp.finger.clone()).collect(),
            finger_count: finger_parts.iter().filter(|fp| fp.finger != PALM).count(),
            finger_parts,
            part,
            text: String::new(),
        };
        summary.text = summary.render();
        Ok(summary)
    }

    /// Renders the sentence from the structured fields.
    pub fn render(&self) -> String {
        match self.mode {
            SummaryMode::General => self.render_general(),
            SummaryMode::Detailed => self.render_detailed(),
        }
    }

    /// The part touched by the most fingers (palm excluded unless it is the
    /// only participant); ties go to the earliest finger in canonical order.
    pub fn dominant_part(&self) -> &str {
        let mut counts: Vec<(&str, usize)> = Vec::new();
        let fingers: Vec<&FingerPart> = if self.finger_count > 0 {
            self.finger_parts.iter().filter(|fp| fp.finger != PALM).collect()
        } else {
            self.finger_parts.iter().collect()
        };
        for fp in fingers {
            match counts.iter_mut().find(|(p, _)| *p == fp.part) {
                Some((_, n)) => *n += 1,
                None => counts.push((&fp.part, 1)),
            }
        }
        let max = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
        counts.into_iter().find(|(_, n)| *n == max).map(|(p, _)| p).unwrap_or("")
    }

    /// Sentence without its closing period, for embedding after a colon.
    pub fn clause(&self) -> &str {
        self.text.strip_suffix('.').unwrap_or(&self.text)
    }

    fn has_palm(&self) -> bool {
        self.fingers.iter().any(|f| f == PALM)
    }

    fn render_general(&self) -> String {
        let part = self.part.as_deref().unwrap_or_default();
        let n = self.finger_count;
        let subject = match (n, self.has_palm()) {
            (0, _) => return format!("The palm contacts the {part} of the {}.", self.object),
            (1, false) => "One finger grasps".to_string(),
            (1, true) => "One finger and the palm grasp".to_string(),
            (n, false) => format!("{} fingers grasp", count_word(n)),
            (n, true) => format!("{} fingers and the palm grasp", count_word(n)),
        };
        format!("{subject} the {part} of the {}.", self.object)
    }

    fn render_detailed(&self) -> String {
        let mut groups: Vec<(&str, Vec<&str>)> = Vec::new();
        for fp in &self.finger_parts {
            match groups.iter_mut().find(|(p, _)| *p == fp.part) {
                Some((_, fingers)) => fingers.push(&fp.finger),
                None => groups.push((&fp.part, vec![&fp.finger])),
            }
        }
        let clauses: Vec<String> = groups
            .iter()
            .map(|(part, fingers)| {
                let (subject, plural) = subject_phrase(fingers);
                let verb = if plural { "contact" } else { "contacts" };
                format!("{subject} {verb} the {}'s {part}", self.object)
            })
            .collect();
        let mut sentence = join_list(&clauses, true);
        if let Some(first) = sentence.get(..1) {
            sentence = first.to_uppercase() + &sentence[1..];
        }
        sentence.push('.');
        sentence
    }
}

/// Builds a summary directly from a contact record.
pub fn summarize_contacts(
    record: &ContactRecord,
    object_name: &str,
    part_names: &BTreeMap<u32, String>,
) -> Result<ContactSummary, ContactError> {
    let pairs = record.finger_parts().into_iter().map(|(finger, (id, name))| FingerPart {
        finger,
        part: part_names.get(&id).cloned().unwrap_or(name),
    });
    ContactSummary::from_finger_parts(object_name, pairs)
}

/// "Thumb", "index finger", "index and middle fingers", "thumb and the palm".
fn subject_phrase(fingers: &[&str]) -> (String, bool) {
    let named: Vec<&str> = fingers.iter().copied().filter(|f| *f != PALM).collect();
    let palm = named.len() < fingers.len();
    let mut items: Vec<String> = Vec::new();
    if !named.is_empty() {
        let list = join_list(&named.iter().map(|s| s.to_string()).collect::<Vec<_>>(), false);
        let phrase = match named.as_slice() {
            ["thumb"] => list,
            [_] => format!("{list} finger"),
            _ => format!("{list} fingers"),
        };
        items.push(phrase);
    }
    if palm {
        items.push("the palm".into());
    }
    let plural = named.len() > 1 || items.len() > 1;
    (join_list(&items, false), plural)
}

/// "a", "a and b", "a, b, and c". With `clauses`, two items are also
/// comma-separated ("a, and b").
fn join_list(items: &[String], clauses: bool) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] if !clauses => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// English word for 1..=10, digits beyond.
pub fn count_word(n: usize) -> String {
    const WORDS: [&str; 10] = ["One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine", "Ten"];
    match n {
        1..=10 => WORDS[n - 1].to_string(),
        _ => n.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(finger: &str, part: &str) -> FingerPart {
        FingerPart { finger: finger.into(), part: part.into() }
    }

    #[test]
    fn four_fingers_on_grip_is_general() {
        let s = ContactSummary::from_finger_parts(
            "hammer",
            [fp("index", "grip"), fp("middle", "grip"), fp("thumb", "grip"), fp("ring", "grip")],
        )
        .unwrap();
        assert_eq!(s.mode, SummaryMode::General);
        assert_eq!(s.text, "Four fingers grasp the grip of the hammer.");
        assert_eq!(s.fingers, vec!["thumb", "index", "middle", "ring"]);
    }

    #[test]
    fn mixed_parts_are_detailed() {
        let s = ContactSummary::from_finger_parts("glass", [fp("index", "body"), fp("thumb", "rim")]).unwrap();
        assert_eq!(s.mode, SummaryMode::Detailed);
        assert_eq!(s.text, "Thumb contacts the glass's rim, and index finger contacts the glass's body.");
        assert_eq!(s.part, None);
    }

    #[test]
    fn detailed_groups_fingers_by_part() {
        let s = ContactSummary::from_finger_parts(
            "mug",
            [fp("index", "handle"), fp("middle", "handle"), fp("thumb", "body"), fp("palm", "body")],
        )
        .unwrap();
        assert_eq!(
            s.text,
            "Thumb and the palm contact the mug's body, and index and middle fingers contact the mug's handle."
        );
    }

    #[test]
    fn single_finger_general_uses_one() {
        let s = ContactSummary::from_finger_parts("mug", [fp("index", "handle")]).unwrap();
        assert_eq!(s.mode, SummaryMode::General);
        assert!(s.text.starts_with("One "), "{}", s.text);
        assert_eq!(s.text, "One finger grasps the handle of the mug.");
    }

    #[test]
    fn palm_is_excluded_from_count() {
        let s = ContactSummary::from_finger_parts("box", [fp("index", "side"), fp("thumb", "side"), fp("palm", "side")]).unwrap();
        assert_eq!(s.finger_count, 2);
        assert_eq!(s.text, "Two fingers and the palm grasp the side of the box.");
        let palm_only = ContactSummary::from_finger_parts("box", [fp("palm", "lid")]).unwrap();
        assert_eq!(palm_only.text, "The palm contacts the lid of the box.");
    }

    #[test]
    fn non_canonical_fingers_sort_after_little() {
        let s = ContactSummary::from_finger_parts("can", [fp("right", "body"), fp("left", "body")]).unwrap();
        assert_eq!(s.fingers, vec!["left", "right"]);
        assert_eq!(s.text, "Two fingers grasp the body of the can.");
    }

    #[test]
    fn render_reproduces_text() {
        let s = ContactSummary::from_finger_parts("glass", [fp("index", "body"), fp("thumb", "rim"), fp("ring", "rim")]).unwrap();
        assert_eq!(s.render(), s.text);
        let back: ContactSummary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back.render(), s.text);
    }

    #[test]
    fn no_contact_is_error() {
        assert!(matches!(ContactSummary::from_finger_parts("x", []), Err(ContactError::NoContact)));
    }

    #[test]
    fn count_words() {
        assert_eq!(count_word(10), "Ten");
        assert_eq!(count_word(11), "11");
    }

    #[test]
    fn dominant_part_majority_then_order() {
        let s = ContactSummary::from_finger_parts("glass", [fp("index", "body"), fp("thumb", "rim"), fp("middle", "body")]).unwrap();
        assert_eq!(s.dominant_part(), "body");
        let tie = ContactSummary::from_finger_parts("glass", [fp("index", "body"), fp("thumb", "rim")]).unwrap();
        assert_eq!(tie.dominant_part(), "rim");
    }
}
