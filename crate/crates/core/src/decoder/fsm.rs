//! The decoding state machine: which token kinds may follow which.
//!
//! States are named after the token that was just consumed. Coordinate values are not
//! constrained, only token categories.

use std::fmt;

use crate::codec::{Special, TokenId, TokenKind, Vocabulary};
use crate::schema::{EntityType, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeState {
    /// Nothing emitted yet.
    Start,
    X1(Role),
    Y1(Role),
    X2(Role),
    /// Four coordinates consumed; an entity type must follow.
    Y2(Role),
    /// An entity of this role is complete.
    Type(Role),
    RoleEnd(Role),
    RxnEnd,
    Eos,
}

impl fmt::Display for DecodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |r: &Role| match r {
            Role::Reactant => "Rct",
            Role::Condition => "Cnd",
            Role::Product => "Prd",
        };
        match self {
            DecodeState::Start => f.write_str("Start"),
            DecodeState::X1(r) => write!(f, "{} x1", tag(r)),
            DecodeState::Y1(r) => write!(f, "{} y1", tag(r)),
            DecodeState::X2(r) => write!(f, "{} x2", tag(r)),
            DecodeState::Y2(r) => write!(f, "{} y2", tag(r)),
            DecodeState::Type(r) => write!(f, "{} type", tag(r)),
            DecodeState::RoleEnd(r) => write!(f, "[{}]", tag(r)),
            DecodeState::RxnEnd => f.write_str("[Rxn]"),
            DecodeState::Eos => f.write_str("[EOS]"),
        }
    }
}

const fn bit(s: Special) -> u16 {
    1 << s as u16
}

/// Legal next tokens: optionally every coordinate bin, plus a set of special tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllowedTokens {
    pub coords: bool,
    specials: u16,
}

impl AllowedTokens {
    const fn new(coords: bool, specials: u16) -> Self {
        Self { coords, specials }
    }

    pub fn allows_special(&self, s: Special) -> bool {
        self.specials & bit(s) != 0
    }

    pub fn contains(&self, token: TokenId, vocab: &Vocabulary) -> bool {
        if vocab.is_coord(token) {
            return self.coords;
        }
        match Special::ALL.get((token - vocab.n_bins()) as usize) {
            Some(&s) => self.allows_special(s),
            None => false,
        }
    }

    /// Allowed ids in ascending order.
    pub fn iter<'a>(&'a self, vocab: &'a Vocabulary) -> impl Iterator<Item = TokenId> + 'a {
        let coords = if self.coords { 0..vocab.n_bins() } else { 0..0 };
        coords.chain(
            Special::ALL
                .into_iter()
                .filter(|s| self.allows_special(*s))
                .map(|s| vocab.special(s)),
        )
    }

    pub fn len(&self, vocab: &Vocabulary) -> usize {
        let c = if self.coords {
            vocab.n_bins() as usize
        } else {
            0
        };
        c + self.specials.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        !self.coords && self.specials == 0
    }

    pub fn without(mut self, s: Special) -> Self {
        self.specials &= !bit(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FsmError {
    #[error("no token may follow [EOS]")]
    Terminal,
    #[error("token {token} is not allowed after {state}")]
    Disallowed { state: DecodeState, token: TokenId },
}

const TYPES: u16 = bit(Special::Mol) | bit(Special::Txt) | bit(Special::Idt);

/// The exact set of tokens that may follow `state`.
pub fn allowed_tokens(state: DecodeState) -> Result<AllowedTokens, FsmError> {
    use DecodeState::*;
    Ok(match state {
        Start | RxnEnd => AllowedTokens::new(true, bit(Special::Eos)),
        X1(_) | Y1(_) | X2(_) => AllowedTokens::new(true, 0),
        Y2(_) => AllowedTokens::new(false, TYPES),
        Type(role) => AllowedTokens::new(true, bit(Special::role_end(role))),
        RoleEnd(Role::Reactant) => AllowedTokens::new(true, bit(Special::Cnd)),
        RoleEnd(Role::Condition) => AllowedTokens::new(true, 0),
        RoleEnd(Role::Product) => AllowedTokens::new(false, bit(Special::Rxn)),
        Eos => return Err(FsmError::Terminal),
    })
}

/// Successor of `state` after consuming `token`.
pub fn step(
    state: DecodeState,
    token: TokenId,
    vocab: &Vocabulary,
) -> Result<DecodeState, FsmError> {
    use DecodeState::*;
    let disallowed = || FsmError::Disallowed { state, token };
    let next = match (state, vocab.classify(token)) {
        (Eos, _) => return Err(FsmError::Terminal),
        (Start | RxnEnd, TokenKind::Coord(_)) => X1(Role::Reactant),
        (RoleEnd(Role::Reactant), TokenKind::Coord(_)) => X1(Role::Condition),
        (RoleEnd(Role::Condition), TokenKind::Coord(_)) => X1(Role::Product),
        (Type(role), TokenKind::Coord(_)) => X1(role),
        (X1(role), TokenKind::Coord(_)) => Y1(role),
        (Y1(role), TokenKind::Coord(_)) => X2(role),
        (X2(role), TokenKind::Coord(_)) => Y2(role),
        (Y2(role), TokenKind::Type(_)) => Type(role),
        (Type(role), TokenKind::RoleEnd(end)) if end == role => RoleEnd(role),
        (RoleEnd(Role::Reactant), TokenKind::RoleEnd(Role::Condition)) => RoleEnd(Role::Condition),
        (RoleEnd(Role::Product), TokenKind::Rxn) => RxnEnd,
        (Start | RxnEnd, TokenKind::Eos) => Eos,
        _ => return Err(disallowed()),
    };
    Ok(next)
}

/// True iff `tokens` drives the machine from `Start` to `Eos` without a violation and ends there.
pub fn accepts(tokens: &[TokenId], vocab: &Vocabulary) -> bool {
    let mut state = DecodeState::Start;
    for &t in tokens {
        match step(state, t, vocab) {
            Ok(s) => state = s,
            Err(_) => return false,
        }
    }
    state == DecodeState::Eos
}

/// Entity type carried by a type token, if it is one.
pub(crate) fn type_of(token: TokenId, vocab: &Vocabulary) -> Option<EntityType> {
    match vocab.classify(token) {
        TokenKind::Type(t) => Some(t),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DecodeState::*;

    fn v() -> Vocabulary {
        Vocabulary::default()
    }

    #[test]
    fn product_type_allows_coords_or_prd() {
        let a = allowed_tokens(Type(Role::Product)).unwrap();
        assert!(a.coords);
        let specials: Vec<_> = a.iter(&v()).filter(|t| !v().is_coord(*t)).collect();
        assert_eq!(specials, vec![v().special(Special::Prd)]);
    }

    #[test]
    fn after_prd_only_rxn() {
        let a = allowed_tokens(RoleEnd(Role::Product)).unwrap();
        assert_eq!(
            a.iter(&v()).collect::<Vec<_>>(),
            vec![v().special(Special::Rxn)]
        );
    }

    #[test]
    fn after_x1_only_coords() {
        let a = allowed_tokens(X1(Role::Reactant)).unwrap();
        assert!(a.coords);
        assert_eq!(a.len(&v()), 2000);
    }

    #[test]
    fn eos_is_terminal() {
        assert_eq!(allowed_tokens(Eos), Err(FsmError::Terminal));
        assert_eq!(step(Eos, 0, &v()), Err(FsmError::Terminal));
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(RxnEnd, 5, &v()), Ok(X1(Role::Reactant)));
        assert_eq!(
            step(RoleEnd(Role::Reactant), v().special(Special::Cnd), &v()),
            Ok(RoleEnd(Role::Condition))
        );
        assert_eq!(step(Start, v().eos(), &v()), Ok(Eos));
        assert!(step(Start, v().special(Special::Rxn), &v()).is_err());
    }

    #[test]
    fn mask_and_step_agree() {
        let states = [
            Start,
            RxnEnd,
            X1(Role::Condition),
            Y1(Role::Product),
            X2(Role::Reactant),
            Y2(Role::Condition),
            Type(Role::Reactant),
            Type(Role::Condition),
            Type(Role::Product),
            RoleEnd(Role::Reactant),
            RoleEnd(Role::Condition),
            RoleEnd(Role::Product),
        ];
        let vocab = Vocabulary::new(3).unwrap();
        for s in states {
            let allowed = allowed_tokens(s).unwrap();
            for t in 0..vocab.size() as TokenId + 1 {
                assert_eq!(
                    allowed.contains(t, &vocab),
                    step(s, t, &vocab).is_ok(),
                    "state {s} token {t}"
                );
            }
        }
    }

    #[test]
    fn accepts_examples() {
        let v = v();
        let s = |x| v.special(x);
        assert!(!accepts(&[s(Special::Rxn), s(Special::Eos)], &v));
        assert!(accepts(&[s(Special::Eos)], &v));
        assert!(!accepts(&[], &v));
        let one = [
            1,
            2,
            3,
            4,
            s(Special::Mol),
            s(Special::Rct),
            s(Special::Cnd),
            5,
            6,
            7,
            8,
            s(Special::Mol),
            s(Special::Prd),
            s(Special::Rxn),
            s(Special::Eos),
        ];
        assert!(accepts(&one, &v));
        assert!(!accepts(&one[..one.len() - 1], &v));
    }
}
