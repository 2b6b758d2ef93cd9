//! Method names: what each ensemble is made of.

use crate::activations::ActivationId;
use crate::builder::{activation_set, ActivationSet, SetName};
use crate::error::{Error, Result};

/// How one ensemble member gets its activations.
#[derive(Debug, Clone, PartialEq)]
pub enum MemberPlan {
    /// The same activation in every slot.
    Fixed(ActivationId),
    /// An independent uniform draw from the set for every slot.
    Stochastic(ActivationSet),
}

impl MemberPlan {
    pub fn describe(&self) -> String {
        match self {
            MemberPlan::Fixed(id) => id.to_string(),
            MemberPlan::Stochastic(set) => {
                let mi = set.members.first().map_or(1.0, |m| m.max_input);
                if mi == 1.0 {
                    format!("S{}", set.name)
                } else {
                    format!("S{}({mi})", set.name)
                }
            }
        }
    }
}

/// A parsed method: its name as written and its flat member list.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub name: String,
    pub members: Vec<MemberPlan>,
}

/// Parses a method name.
///
/// Grammar, `+` joining terms into one flat ensemble:
///
/// ```text
/// term   := activation                     one fixed model, e.g. relu, melu_k8_255, srelu(255)
///         | "FusRelu" K                    K ReLU models
///         | "Fus" set K ["(255)"]          one fixed model per set member, the first K in set order
///         | "Sto" set K ["(255)"]          K stochastic models
///         | "S" set ["(255)"]              one stochastic model
/// set    := OldAS | FullAS | BaseAS        (case-insensitive)
/// ```
pub fn parse_method(name: &str) -> Result<Method> {
    let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::config("empty method name"));
    }
    let mut members = Vec::new();
    for term in compact.split('+') {
        members.extend(parse_term(term).map_err(|e| Error::config(format!("method '{name}': {e}")))?);
    }
    Ok(Method { name: compact, members })
}

fn parse_term(term: &str) -> Result<Vec<MemberPlan>> {
    if term.is_empty() {
        return Err(Error::config("empty term"));
    }
    let (body, max_input) = match term.strip_suffix("(255)") {
        Some(b) => (b, 255.0),
        None => match term.strip_suffix("(1)") {
            Some(b) => (b, 1.0),
            None => (term, 1.0),
        },
    };
    let lower = body.to_ascii_lowercase();

    if let Some(k) = lower.strip_prefix("fusrelu") {
        let k = count(k)?;
        let relu = ActivationId::new(crate::activations::ActivationKind::Relu, max_input);
        return Ok(vec![MemberPlan::Fixed(relu); k]);
    }
    for (prefix, stochastic) in [("fus", false), ("sto", true)] {
        if let Some(rest) = lower.strip_prefix(prefix) {
            if let Some((set, k)) = split_set(rest)? {
                let set = activation_set(set.as_str(), max_input)?;
                let k = count(k)?;
                return Ok(if stochastic {
                    vec![MemberPlan::Stochastic(set); k]
                } else {
                    (0..k).map(|i| MemberPlan::Fixed(set.members[i % set.len()])).collect()
                });
            }
        }
    }
    if let Some(rest) = lower.strip_prefix('s') {
        if let Some((set, k)) = split_set(rest)? {
            if k.is_empty() {
                return Ok(vec![MemberPlan::Stochastic(activation_set(set.as_str(), max_input)?)]);
            }
        }
    }
    let id: ActivationId = body.parse()?;
    if max_input == 255.0 {
        if id.max_input != 1.0 {
            return Err(Error::config(format!("'{term}' sets maxInput twice")));
        }
        return Ok(vec![MemberPlan::Fixed(ActivationId::new(id.kind, 255.0))]);
    }
    Ok(vec![MemberPlan::Fixed(id)])
}

/// Splits a lower-cased `setK` into the set and the (possibly empty) count text.
fn split_set(rest: &str) -> Result<Option<(SetName, &str)>> {
    for set in SetName::ALL {
        let key = set.as_str().to_ascii_lowercase();
        if let Some(k) = rest.strip_prefix(key.as_str()) {
            if k.chars().all(|c| c.is_ascii_digit()) {
                return Ok(Some((set, k)));
            }
        }
    }
    Ok(None)
}

fn count(text: &str) -> Result<usize> {
    match text.parse::<usize>() {
        Ok(k) if k > 0 => Ok(k),
        _ => Err(Error::config(format!("expected a positive member count, got '{text}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationKind as K;

    fn fixed(k: K, mi: f64) -> MemberPlan {
        MemberPlan::Fixed(ActivationId::new(k, mi))
    }

    #[test]
    fn single_activations() {
        assert_eq!(parse_method("relu").unwrap().members, vec![fixed(K::Relu, 1.0)]);
        assert_eq!(parse_method("melu_k8_255").unwrap().members, vec![fixed(K::MeluK8, 255.0)]);
        assert_eq!(parse_method("srelu(255)").unwrap().members, vec![fixed(K::Srelu, 255.0)]);
        assert!(parse_method("melu_k8_255(255)").is_err());
        assert!(parse_method("tanh").is_err());
        assert!(parse_method("").is_err());
    }

    #[test]
    fn fused_relu() {
        let m = parse_method("FusRelu5").unwrap();
        assert_eq!(m.name, "FusRelu5");
        assert_eq!(m.members, vec![fixed(K::Relu, 1.0); 5]);
        assert!(parse_method("FusRelu0").is_err());
        assert!(parse_method("FusRelu").is_err());
    }

    #[test]
    fn fused_sets_take_members_in_order() {
        let m = parse_method("FusOldAS10(255)").unwrap();
        assert_eq!(m.members.len(), 10);
        let old = SetName::OldAs.kinds();
        for (i, p) in m.members.iter().enumerate() {
            assert_eq!(p, &fixed(old[i % old.len()], 255.0));
        }
        let full = parse_method("FusFullAS16(255)").unwrap();
        let kinds: Vec<_> = full.members.iter().map(|p| match p {
            MemberPlan::Fixed(id) => id.kind,
            _ => unreachable!(),
        }).collect();
        assert_eq!(kinds, SetName::FullAs.kinds());
    }

    #[test]
    fn stochastic_and_composites() {
        let m = parse_method("StoFullAS10").unwrap();
        assert_eq!(m.members.len(), 10);
        assert!(matches!(&m.members[0], MemberPlan::Stochastic(s) if s.len() == 16 && s.members[0].max_input == 1.0));
        let s = parse_method("SOldAS(255)").unwrap();
        assert_eq!(s.members.len(), 1);
        assert_eq!(s.members[0].describe(), "SOldAS(255)");
        let c = parse_method("StoBaseAS8(255) + StoFullAS7(255)").unwrap();
        assert_eq!(c.name, "StoBaseAS8(255)+StoFullAS7(255)");
        assert_eq!(c.members.len(), 15);
        assert!(matches!(&c.members[7], MemberPlan::Stochastic(s) if s.name == "BaseAS"));
        assert!(matches!(&c.members[8], MemberPlan::Stochastic(s) if s.name == "FullAS"));
        assert!(parse_method("relu+").is_err());
        assert!(parse_method("StoNewAS3").is_err());
        assert!(parse_method("stoOLDas3").is_ok());
    }
}
