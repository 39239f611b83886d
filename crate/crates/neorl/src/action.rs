use crate::geom::Vec2;

/// One of the four cardinal acceleration commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionId {
    North,
    South,
    East,
    West,
}

impl ActionId {
    pub const COUNT: usize = 4;
    pub const ALL: [ActionId; 4] = [
        ActionId::North,
        ActionId::South,
        ActionId::East,
        ActionId::West,
    ];

    pub fn index(self) -> usize {
        match self {
            ActionId::North => 0,
            ActionId::South => 1,
            ActionId::East => 2,
            ActionId::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<ActionId> {
        ActionId::ALL.get(i).copied()
    }

    /// Unit direction of the acceleration, y pointing north.
    pub fn unit(self) -> Vec2 {
        match self {
            ActionId::North => Vec2::new(0.0, 1.0),
            ActionId::South => Vec2::new(0.0, -1.0),
            ActionId::East => Vec2::new(1.0, 0.0),
            ActionId::West => Vec2::new(-1.0, 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for (i, a) in ActionId::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(ActionId::from_index(i), Some(*a));
        }
        assert_eq!(ActionId::from_index(4), None);
    }

    #[test]
    fn units_are_cardinal() {
        for a in ActionId::ALL {
            let u = a.unit();
            assert_eq!(u.length(), 1.0);
            assert!(u.x == 0.0 || u.y == 0.0);
        }
    }
}
