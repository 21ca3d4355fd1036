use crate::schema::{Entity, EntityType, ReactionStructure, Role, StructuredReaction};

type RoleKey = Vec<([u64; 4], EntityType)>;

fn role_key(entities: &[Entity]) -> RoleKey {
    let mut key: RoleKey = entities
        .iter()
        .map(|e| {
            let b = e.bbox;
            (
                [
                    b.x1.to_bits(),
                    b.y1.to_bits(),
                    b.x2.to_bits(),
                    b.y2.to_bits(),
                ],
                e.etype,
            )
        })
        .collect();
    key.sort_unstable();
    key
}

fn reaction_key(r: &StructuredReaction) -> [RoleKey; 3] {
    Role::ALL.map(|role| role_key(r.role(role)))
}

/// Clean up a decoded structure.
///
/// 1. drop entities with an empty box (`x1 >= x2` or `y1 >= y2`);
/// 2. drop reactions left without reactants or products;
/// 3. drop exact duplicate reactions (role-wise multisets of box and type), keeping the first.
///
/// Boxes come from bin centers, so equal bins give bit-identical coordinates.
pub fn postprocess(structure: &ReactionStructure) -> ReactionStructure {
    let mut seen: Vec<[RoleKey; 3]> = Vec::new();
    let mut reactions = Vec::new();
    for rxn in &structure.reactions {
        let mut cleaned = rxn.clone();
        for role in Role::ALL {
            cleaned.role_mut(role).retain(|e| !e.bbox.is_empty());
        }
        if cleaned.reactants.is_empty() || cleaned.products.is_empty() {
            continue;
        }
        let key = reaction_key(&cleaned);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        reactions.push(cleaned);
    }
    ReactionStructure { reactions }
}
