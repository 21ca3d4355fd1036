use serde::{Deserialize, Serialize};

use crate::schema::{EntityType, Role};

pub type TokenId = u32;

pub const DEFAULT_N_BINS: u32 = 2000;

/// Special tokens, in vocabulary order. They follow the coordinate bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Special {
    Mol,
    Txt,
    Idt,
    Rct,
    Cnd,
    Prd,
    Rxn,
    Eos,
    Bos,
    Pad,
}

impl Special {
    pub const ALL: [Special; 10] = [
        Special::Mol,
        Special::Txt,
        Special::Idt,
        Special::Rct,
        Special::Cnd,
        Special::Prd,
        Special::Rxn,
        Special::Eos,
        Special::Bos,
        Special::Pad,
    ];

    pub const COUNT: u32 = 10;

    pub fn offset(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Special::Mol => "[Mol]",
            Special::Txt => "[Txt]",
            Special::Idt => "[Idt]",
            Special::Rct => "[Rct]",
            Special::Cnd => "[Cnd]",
            Special::Prd => "[Prd]",
            Special::Rxn => "[Rxn]",
            Special::Eos => "[EOS]",
            Special::Bos => "[BOS]",
            Special::Pad => "[Pad]",
        }
    }

    pub fn entity_type(etype: EntityType) -> Self {
        match etype {
            EntityType::Mol => Special::Mol,
            EntityType::Txt => Special::Txt,
            EntityType::Idt => Special::Idt,
        }
    }

    pub fn role_end(role: Role) -> Self {
        match role {
            Role::Reactant => Special::Rct,
            Role::Condition => Special::Cnd,
            Role::Product => Special::Prd,
        }
    }
}

/// What a token id stands for under a given vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Coord(u32),
    Type(EntityType),
    RoleEnd(Role),
    Rxn,
    Eos,
    Bos,
    Pad,
    OutOfRange,
}

/// Coordinate bins occupy ids `0..n_bins`; the ten special tokens follow in [`Special::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    n_bins: u32,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_N_BINS,
        }
    }
}

impl Vocabulary {
    /// Returns `None` when `n_bins` is zero.
    pub fn new(n_bins: u32) -> Option<Self> {
        (n_bins > 0).then_some(Self { n_bins })
    }

    pub fn n_bins(&self) -> u32 {
        self.n_bins
    }

    pub fn size(&self) -> usize {
        (self.n_bins + Special::COUNT) as usize
    }

    pub fn special(&self, s: Special) -> TokenId {
        self.n_bins + s.offset()
    }

    pub fn eos(&self) -> TokenId {
        self.special(Special::Eos)
    }

    pub fn is_coord(&self, token: TokenId) -> bool {
        token < self.n_bins
    }

    pub fn classify(&self, token: TokenId) -> TokenKind {
        if token < self.n_bins {
            return TokenKind::Coord(token);
        }
        let Some(s) = Special::ALL.get((token - self.n_bins) as usize) else {
            return TokenKind::OutOfRange;
        };
        match s {
            Special::Mol => TokenKind::Type(EntityType::Mol),
            Special::Txt => TokenKind::Type(EntityType::Txt),
            Special::Idt => TokenKind::Type(EntityType::Idt),
            Special::Rct => TokenKind::RoleEnd(Role::Reactant),
            Special::Cnd => TokenKind::RoleEnd(Role::Condition),
            Special::Prd => TokenKind::RoleEnd(Role::Product),
            Special::Rxn => TokenKind::Rxn,
            Special::Eos => TokenKind::Eos,
            Special::Bos => TokenKind::Bos,
            Special::Pad => TokenKind::Pad,
        }
    }

    /// Human-readable token, e.g. `17` or `[Rct]`.
    pub fn token_name(&self, token: TokenId) -> String {
        if self.is_coord(token) {
            token.to_string()
        } else if let Some(s) = Special::ALL.get((token - self.n_bins) as usize) {
            s.name().to_owned()
        } else {
            format!("<{token}?>")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let v = Vocabulary::default();
        assert_eq!(v.size(), 2010);
        assert_eq!(v.special(Special::Mol), 2000);
        assert_eq!(v.special(Special::Pad), 2009);
        assert_eq!(v.classify(1999), TokenKind::Coord(1999));
        assert_eq!(v.classify(2003), TokenKind::RoleEnd(Role::Reactant));
        assert_eq!(v.classify(2007), TokenKind::Eos);
        assert_eq!(v.classify(2010), TokenKind::OutOfRange);
        assert!(Vocabulary::new(0).is_none());
        assert_eq!(v.token_name(2006), "[Rxn]");
    }
}
