//! Builtin functions and operators (except the short-circuiting `and`/`or`).

use std::cmp::Ordering;

use crate::syntax::Builtin;

use super::error::{type_error, EvalError};
use super::value::{Item, Value};

/// An atomized item; nodes atomize to untyped text.
#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    Int(i64),
    Str(String),
    Bool(bool),
    Untyped(String),
}

impl Atom {
    fn into_item(self) -> Item {
        match self {
            Atom::Int(n) => Item::Int(n),
            Atom::Bool(b) => Item::Bool(b),
            Atom::Str(s) | Atom::Untyped(s) => Item::str(&s),
        }
    }

    fn lexical(&self) -> String {
        match self {
            Atom::Int(n) => n.to_string(),
            Atom::Bool(b) => b.to_string(),
            Atom::Str(s) | Atom::Untyped(s) => s.clone(),
        }
    }
}

pub fn atomize(item: &Item) -> Result<Atom, EvalError> {
    Ok(match item {
        Item::Int(n) => Atom::Int(*n),
        Item::Str(s) => Atom::Str(s.to_string()),
        Item::Bool(b) => Atom::Bool(*b),
        Item::Node(n) => Atom::Untyped(n.string_value()),
        other => return Err(type_error(format!("a {} has no atomic value", other.type_name()))),
    })
}

fn optional_atom(v: &Value, what: &str) -> Result<Option<Atom>, EvalError> {
    match v.len() {
        0 => Ok(None),
        1 => atomize(&v[0]).map(Some),
        n => Err(type_error(format!("{what} expects at most one item, got {n}"))),
    }
}

fn parse_int(s: &str) -> Result<i64, EvalError> {
    s.trim().parse().map_err(|_| type_error(format!("cannot cast \"{s}\" to integer")))
}

fn parse_bool(s: &str) -> Result<bool, EvalError> {
    match s.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(type_error(format!("cannot cast \"{s}\" to boolean"))),
    }
}

fn numeric(a: Atom, what: &str) -> Result<i64, EvalError> {
    match a {
        Atom::Int(n) => Ok(n),
        Atom::Untyped(s) => parse_int(&s),
        other => Err(type_error(format!("{what} expects integers, got {other:?}"))),
    }
}

fn arithmetic(op: Builtin, a: &Value, b: &Value) -> Result<Value, EvalError> {
    let what = op.display_name();
    let (Some(x), Some(y)) = (optional_atom(a, what)?, optional_atom(b, what)?) else {
        return Ok(Value::empty());
    };
    let (x, y) = (numeric(x, what)?, numeric(y, what)?);
    let r = match op {
        Builtin::Add => x.checked_add(y),
        Builtin::Sub => x.checked_sub(y),
        Builtin::Mul => x.checked_mul(y),
        Builtin::IDiv | Builtin::Mod if y == 0 => return Err(type_error("division by zero")),
        Builtin::IDiv => x.checked_div(y),
        Builtin::Mod => x.checked_rem(y),
        _ => unreachable!("not arithmetic"),
    };
    r.map(Value::int).ok_or_else(|| type_error(format!("integer overflow in `{what}`")))
}

/// Orders two atoms, casting untyped text towards the other operand's type.
pub fn compare_atoms(a: &Atom, b: &Atom) -> Result<Ordering, EvalError> {
    use Atom::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => x.cmp(y),
        (Bool(x), Bool(y)) => x.cmp(y),
        (Str(x) | Untyped(x), Str(y) | Untyped(y)) => x.cmp(y),
        (Untyped(s), Int(y)) => parse_int(s)?.cmp(y),
        (Int(x), Untyped(s)) => x.cmp(&parse_int(s)?),
        (Untyped(s), Bool(y)) => parse_bool(s)?.cmp(y),
        (Bool(x), Untyped(s)) => x.cmp(&parse_bool(s)?),
        _ => return Err(type_error(format!("cannot compare {a:?} with {b:?}"))),
    })
}

/// General (existential) comparison.
fn compare(op: Builtin, a: &Value, b: &Value) -> Result<Value, EvalError> {
    let xs = a.iter().map(atomize).collect::<Result<Vec<_>, _>>()?;
    let ys = b.iter().map(atomize).collect::<Result<Vec<_>, _>>()?;
    for x in &xs {
        for y in &ys {
            let ord = compare_atoms(x, y)?;
            let hit = match op {
                Builtin::Eq => ord == Ordering::Equal,
                Builtin::Ne => ord != Ordering::Equal,
                Builtin::Lt => ord == Ordering::Less,
                Builtin::Le => ord != Ordering::Greater,
                Builtin::Gt => ord == Ordering::Greater,
                Builtin::Ge => ord != Ordering::Less,
                _ => unreachable!("not a comparison"),
            };
            if hit {
                return Ok(Value::bool(true));
            }
        }
    }
    Ok(Value::bool(false))
}

const MAX_RANGE: i64 = 10_000_000;

fn range(a: &Value, b: &Value) -> Result<Value, EvalError> {
    let (Some(x), Some(y)) = (optional_atom(a, "to")?, optional_atom(b, "to")?) else {
        return Ok(Value::empty());
    };
    let (lo, hi) = (numeric(x, "to")?, numeric(y, "to")?);
    if hi < lo {
        return Ok(Value::empty());
    }
    if hi.saturating_sub(lo) >= MAX_RANGE {
        return Err(type_error(format!("range {lo} to {hi} is too large")));
    }
    Ok((lo..=hi).map(Item::Int).collect())
}

fn distinct_values(v: &Value) -> Result<Value, EvalError> {
    let mut seen: Vec<Item> = Vec::new();
    for item in v.iter() {
        let a = atomize(item)?.into_item();
        let dup = seen.iter().any(|s| match (s, &a) {
            (Item::Int(x), Item::Int(y)) => x == y,
            (Item::Str(x), Item::Str(y)) => x == y,
            (Item::Bool(x), Item::Bool(y)) => x == y,
            _ => false,
        });
        if !dup {
            seen.push(a);
        }
    }
    Ok(seen.into())
}

/// Effective boolean value.
pub fn ebv(v: &Value) -> Result<bool, EvalError> {
    match v.items() {
        [] => Ok(false),
        [Item::Node(_), ..] => Ok(true),
        [Item::Bool(b)] => Ok(*b),
        [Item::Int(n)] => Ok(*n != 0),
        [single] => Err(type_error(format!("no effective boolean value for a {}", single.type_name()))),
        _ => Err(type_error("no effective boolean value for a sequence of several atoms")),
    }
}

fn cast(op: Builtin, v: &Value) -> Result<Value, EvalError> {
    let Some(a) = optional_atom(v, op.display_name())? else {
        return Ok(Value::empty());
    };
    Ok(match op {
        Builtin::Integer => Value::int(match a {
            Atom::Int(n) => n,
            Atom::Bool(b) => b as i64,
            Atom::Str(s) | Atom::Untyped(s) => parse_int(&s)?,
        }),
        Builtin::String => Value::str(&a.lexical()),
        Builtin::Boolean => Value::bool(match a {
            Atom::Bool(b) => b,
            Atom::Int(n) => n != 0,
            Atom::Str(s) | Atom::Untyped(s) => parse_bool(&s)?,
        }),
        _ => unreachable!("not a cast"),
    })
}

fn concat(args: &[Value]) -> Result<Value, EvalError> {
    let mut out = String::new();
    for a in args {
        if let Some(atom) = optional_atom(a, "concat")? {
            out.push_str(&atom.lexical());
        }
    }
    Ok(Value::str(&out))
}

fn pow(a: &Value, b: &Value) -> Result<Value, EvalError> {
    let (Some(x), Some(y)) = (optional_atom(a, "pow")?, optional_atom(b, "pow")?) else {
        return Ok(Value::empty());
    };
    let (x, y) = (numeric(x, "pow")?, numeric(y, "pow")?);
    let exp = u32::try_from(y).map_err(|_| type_error(format!("pow exponent {y} out of range")))?;
    x.checked_pow(exp).map(Value::int).ok_or_else(|| type_error("integer overflow in `pow`"))
}

fn extremum(op: Builtin, a: &Value, b: &Value) -> Result<Value, EvalError> {
    let what = op.display_name();
    let (Some(x), Some(y)) = (optional_atom(a, what)?, optional_atom(b, what)?) else {
        return Ok(Value::empty());
    };
    let ord = compare_atoms(&x, &y)?;
    let pick_first = match op {
        Builtin::Greatest => ord != Ordering::Less,
        _ => ord != Ordering::Greater,
    };
    Ok(Value::one(if pick_first { x } else { y }.into_item()))
}

/// Applies a builtin to already evaluated arguments.
pub fn apply(op: Builtin, args: &[Value]) -> Result<Value, EvalError> {
    if !op.accepts_arity(args.len()) {
        return Err(EvalError::ArityMismatch(format!("{} given {} argument(s)", op.display_name(), args.len())));
    }
    match op {
        Builtin::Or | Builtin::And => {
            let (x, y) = (ebv(&args[0])?, ebv(&args[1])?);
            Ok(Value::bool(if op == Builtin::Or { x || y } else { x && y }))
        }
        Builtin::Eq | Builtin::Ne | Builtin::Lt | Builtin::Le | Builtin::Gt | Builtin::Ge => {
            compare(op, &args[0], &args[1])
        }
        Builtin::To => range(&args[0], &args[1]),
        Builtin::Add | Builtin::Sub | Builtin::Mul | Builtin::IDiv | Builtin::Mod => {
            arithmetic(op, &args[0], &args[1])
        }
        Builtin::DistinctValues => distinct_values(&args[0]),
        Builtin::Head => Ok(args[0].first().cloned().map_or_else(Value::empty, Value::one)),
        Builtin::Tail => Ok(args[0].iter().skip(1).cloned().collect()),
        Builtin::Empty => Ok(Value::bool(args[0].is_empty())),
        Builtin::Exists => Ok(Value::bool(!args[0].is_empty())),
        Builtin::Count => Ok(Value::int(args[0].len() as i64)),
        Builtin::Concat => concat(args),
        Builtin::Pow => pow(&args[0], &args[1]),
        Builtin::Greatest | Builtin::Least => extremum(op, &args[0], &args[1]),
        Builtin::Not => Ok(Value::bool(!ebv(&args[0])?)),
        Builtin::Integer | Builtin::String | Builtin::Boolean => cast(op, &args[0]),
        Builtin::Error => Err(EvalError::UnknownLabel("error() raised".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::value::values_equal;

    fn ints(ns: &[i64]) -> Value {
        ns.iter().map(|n| Item::Int(*n)).collect()
    }

    #[test]
    fn distinct_values_keep_first_occurrences() {
        let keys = ints(&[0, 1, 1, 0, 1, 1, 0, 1, 1, 0]);
        assert!(values_equal(&apply(Builtin::DistinctValues, &[keys]).unwrap(), &ints(&[0, 1])));
    }

    #[test]
    fn pow_and_empty() {
        assert!(values_equal(&apply(Builtin::Pow, &[ints(&[2]), ints(&[3])]).unwrap(), &ints(&[8])));
        assert!(values_equal(&apply(Builtin::Empty, &[Value::empty()]).unwrap(), &Value::bool(true)));
    }

    #[test]
    fn general_comparison_is_existential() {
        let r = apply(Builtin::Eq, &[ints(&[1, 2, 3]), ints(&[3])]).unwrap();
        assert!(values_equal(&r, &Value::bool(true)));
        let r = apply(Builtin::Eq, &[Value::empty(), ints(&[3])]).unwrap();
        assert!(values_equal(&r, &Value::bool(false)));
    }

    #[test]
    fn arithmetic_errors() {
        assert!(matches!(apply(Builtin::Mod, &[Value::str("a"), ints(&[2])]), Err(EvalError::TypeError(_))));
        assert!(matches!(apply(Builtin::IDiv, &[ints(&[1]), ints(&[0])]), Err(EvalError::TypeError(_))));
        assert!(apply(Builtin::Add, &[ints(&[i64::MAX]), ints(&[1])]).is_err());
        assert!(apply(Builtin::Add, &[Value::empty(), ints(&[1])]).unwrap().is_empty());
    }

    #[test]
    fn extremes_and_concat() {
        assert!(values_equal(&apply(Builtin::Greatest, &[ints(&[3]), ints(&[7])]).unwrap(), &ints(&[7])));
        assert!(values_equal(&apply(Builtin::Least, &[ints(&[3]), ints(&[7])]).unwrap(), &ints(&[3])));
        let c = apply(Builtin::Concat, &[Value::str("a"), Value::empty(), ints(&[1])]).unwrap();
        assert!(values_equal(&c, &Value::str("a1")));
    }

    #[test]
    fn casts() {
        assert!(values_equal(&apply(Builtin::Integer, &[Value::str(" 12 ")]).unwrap(), &ints(&[12])));
        assert!(values_equal(&apply(Builtin::Boolean, &[Value::str("false")]).unwrap(), &Value::bool(false)));
        assert!(values_equal(&apply(Builtin::String, &[ints(&[-4])]).unwrap(), &Value::str("-4")));
        assert!(apply(Builtin::Integer, &[Value::str("x")]).is_err());
    }

    #[test]
    fn effective_boolean_value() {
        assert!(!ebv(&Value::empty()).unwrap());
        assert!(ebv(&ints(&[2])).unwrap());
        assert!(ebv(&Value::str("x")).is_err());
        assert!(ebv(&ints(&[1, 2])).is_err());
    }
}
