//! Reader and writer for the `CREATE TABLE` subset used by schema files.
//!
//! Accepted per statement: column definitions (type, nullability/default
//! words, optional `COMMENT`), `PRIMARY KEY (...)` and
//! `FOREIGN KEY (...) REFERENCES t(...)`. Column comments may be quoted or
//! run unquoted to the end of the line. Anything else is rejected.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::DdlError;
use crate::model::{AttributeDef, Cardinality, DatabaseModel, FkConstraint, TableDef};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> DdlError {
        DdlError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            if rest.starts_with("--") {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if rest.starts_with("/*") {
                self.bump();
                self.bump();
                while !self.rest().is_empty() && !self.rest().starts_with("*/") {
                    self.bump();
                }
                self.bump();
                self.bump();
            } else if self.peek().is_some_and(char::is_whitespace) {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest().is_empty()
    }

    fn eat_char(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_char(&mut self, c: char) -> Result<(), DdlError> {
        if self.eat_char(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    /// Peeks the next bare word without consuming it.
    fn peek_word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '$'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        (len > 0).then(|| &rest[..len])
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        match self.peek_word() {
            Some(w) if w.eq_ignore_ascii_case(kw) => {
                for _ in 0..w.chars().count() {
                    self.bump();
                }
                true
            }
            _ => false,
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DdlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn word(&mut self) -> Result<String, DdlError> {
        match self.peek_word() {
            Some(w) => {
                for _ in 0..w.chars().count() {
                    self.bump();
                }
                Ok(w.to_string())
            }
            None => Err(self.error("expected a word")),
        }
    }

    fn ident(&mut self) -> Result<String, DdlError> {
        self.skip_ws();
        match self.peek() {
            Some(q @ ('`' | '"')) => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        Some(c) if c == q => break,
                        Some(c) => out.push(c),
                        None => return Err(self.error("unterminated quoted identifier")),
                    }
                }
                if out.is_empty() {
                    return Err(self.error("empty identifier"));
                }
                Ok(out)
            }
            _ => self.word().map_err(|_| self.error("expected an identifier")),
        }
    }

    fn quoted_string(&mut self) -> Result<String, DdlError> {
        self.skip_ws();
        if self.peek() != Some('\'') {
            return Err(self.error("expected a quoted string"));
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('\'') if self.peek() == Some('\'') => {
                    self.bump();
                    out.push('\'');
                }
                Some('\'') => return Ok(out),
                Some(c) => out.push(c),
                None => return Err(self.error("unterminated string")),
            }
        }
    }

    /// Unquoted comment: the rest of the line. A trailing comma is left in
    /// place as the item separator.
    fn line_comment_text(&mut self) -> String {
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.bump();
        }
        let rest = self.rest();
        let line = rest.split('\n').next().unwrap_or("");
        let trimmed = line.trim_end();
        let body = trimmed.strip_suffix(',').unwrap_or(trimmed);
        let text = body.trim().to_string();
        for _ in 0..body.chars().count() {
            self.bump();
        }
        text
    }

    fn raw_token(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || matches!(c, ',' | ')' | '(' | '\'') {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }

    fn ident_list(&mut self) -> Result<Vec<String>, DdlError> {
        self.expect_char('(')?;
        let mut out = Vec::new();
        loop {
            out.push(self.ident()?);
            // Sort order markers are accepted and dropped.
            let _ = self.eat_keyword("ASC") || self.eat_keyword("DESC");
            if self.eat_char(',') {
                continue;
            }
            self.expect_char(')')?;
            return Ok(out);
        }
    }
}

/// Parses a script of `CREATE TABLE` statements into tables and key
/// constraints. Foreign keys to undeclared tables are kept; they surface as
/// dangling references in [`crate::model::validate_model`].
pub fn parse_ddl(ddl_text: &str) -> Result<DatabaseModel, DdlError> {
    let mut cur = Cursor::new(ddl_text);
    let mut model = DatabaseModel::default();
    let mut names = BTreeSet::new();
    while !cur.at_end() {
        if cur.eat_char(';') {
            continue;
        }
        let (table, fks) = parse_create_table(&mut cur)?;
        if !names.insert(table.name.clone()) {
            return Err(DdlError::DuplicateTable(table.name));
        }
        model.tables.push(table);
        model.constraints.extend(fks);
    }
    Ok(model)
}

fn parse_create_table(cur: &mut Cursor<'_>) -> Result<(TableDef, Vec<FkConstraint>), DdlError> {
    if !cur.eat_keyword("CREATE") {
        return Err(cur.error("only CREATE TABLE statements are supported"));
    }
    if !cur.eat_keyword("TABLE") {
        return Err(cur.error("only CREATE TABLE statements are supported"));
    }
    let name = cur.ident()?;
    let mut table = TableDef::new(name.clone());
    let mut fks = Vec::new();
    cur.expect_char('(')?;
    loop {
        if cur.eat_keyword("PRIMARY") {
            cur.expect_keyword("KEY")?;
            if !table.primary_key.is_empty() {
                return Err(cur.error("second PRIMARY KEY clause"));
            }
            table.primary_key = cur.ident_list()?;
        } else if cur.eat_keyword("FOREIGN") {
            cur.expect_keyword("KEY")?;
            let fk_columns = cur.ident_list()?;
            cur.expect_keyword("REFERENCES")?;
            let to_table = cur.ident()?;
            let pk_columns = cur.ident_list()?;
            if fk_columns.len() != pk_columns.len() {
                return Err(cur.error("foreign key and referenced column counts differ"));
            }
            fks.push(FkConstraint {
                from_table: name.clone(),
                fk_columns,
                to_table,
                pk_columns,
                kind: Cardinality::ManyToOne,
            });
        } else if matches!(cur.peek_word(), Some(w) if w.eq_ignore_ascii_case("CONSTRAINT") || w.eq_ignore_ascii_case("UNIQUE") || w.eq_ignore_ascii_case("INDEX") || w.eq_ignore_ascii_case("KEY") || w.eq_ignore_ascii_case("CHECK"))
        {
            return Err(cur.error("unsupported table constraint"));
        } else {
            table.attributes.push(parse_column(cur)?);
        }
        if cur.eat_char(',') {
            continue;
        }
        cur.expect_char(')')?;
        break;
    }
    if cur.eat_keyword("COMMENT") {
        let _ = cur.eat_char('=');
        table.description = cur.quoted_string()?;
    }
    if !cur.eat_char(';') && !cur.at_end() && !matches!(cur.peek_word(), Some(w) if w.eq_ignore_ascii_case("CREATE")) {
        return Err(cur.error("expected `;` or end of statement"));
    }
    // 1:1 when the referencing columns are exactly the table's primary key.
    let pk: BTreeSet<&str> = table.primary_key.iter().map(String::as_str).collect();
    for fk in &mut fks {
        let cols: BTreeSet<&str> = fk.fk_columns.iter().map(String::as_str).collect();
        if !pk.is_empty() && cols == pk {
            fk.kind = Cardinality::OneToOne;
        }
    }
    Ok((table, fks))
}

fn parse_column(cur: &mut Cursor<'_>) -> Result<AttributeDef, DdlError> {
    let name = cur.ident()?;
    let mut sql_type = cur.word().map_err(|_| cur.error(format!("column `{name}` lacks a type")))?;
    if cur.eat_char('(') {
        let mut args = Vec::new();
        loop {
            args.push(cur.word()?);
            if cur.eat_char(',') {
                continue;
            }
            cur.expect_char(')')?;
            break;
        }
        sql_type = format!("{}({})", sql_type, args.join(","));
    }
    let mut modifiers: Vec<String> = Vec::new();
    let mut description = String::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some(',') | Some(')') | None => break,
            Some('\'') => modifiers.push(format!("'{}'", cur.quoted_string()?.replace('\'', "''"))),
            _ => {
                if cur.eat_keyword("COMMENT") {
                    cur.skip_ws();
                    description = if cur.peek() == Some('\'') {
                        cur.quoted_string()?
                    } else {
                        cur.line_comment_text()
                    };
                    break;
                }
                let tok = cur.raw_token();
                if tok.is_empty() {
                    return Err(cur.error(format!("unexpected input in column `{name}`")));
                }
                modifiers.push(tok);
            }
        }
    }
    Ok(AttributeDef {
        name,
        sql_type,
        nullability_default: modifiers.join(" "),
        description,
    })
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Writes tables and constraints back as `CREATE TABLE` statements that
/// [`parse_ddl`] reads into the same tables and constraints.
pub fn emit_ddl(model: &DatabaseModel) -> String {
    let mut out = String::new();
    for t in &model.tables {
        let mut items: Vec<String> = Vec::new();
        for a in &t.attributes {
            let mut line = format!("  {} {}", a.name, a.sql_type);
            if !a.nullability_default.is_empty() {
                line.push(' ');
                line.push_str(&a.nullability_default);
            }
            if !a.description.is_empty() {
                line.push_str(" COMMENT ");
                line.push_str(&quote(&a.description));
            }
            items.push(line);
        }
        if !t.primary_key.is_empty() {
            items.push(format!("  PRIMARY KEY ({})", t.primary_key.join(", ")));
        }
        for c in model.constraints.iter().filter(|c| c.from_table == t.name) {
            items.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {}({})",
                c.fk_columns.join(", "),
                c.to_table,
                c.pk_columns.join(", ")
            ));
        }
        out.push_str(&format!("CREATE TABLE {} (\n{}\n)", t.name, items.join(",\n")));
        if !t.description.is_empty() {
            out.push_str(" COMMENT ");
            out.push_str(&quote(&t.description));
        }
        out.push_str(";\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLAIM_AMOUNT: &str = r#"CREATE TABLE Claim_Amount
(
	Claim_Amount_Identifier bigint  NOT NULL COMMENT Claim Amount Identifier is the unique identifier of the financial amount reserved, paid, or collected in connection with a claim. The money being paid or collected for settling a claim and paying the claimants, reinsurers, other insurers, and other interested parties. Claim amounts are classified by various attributes.,
	Claim_Identifier     int  NOT NULL COMMENT Claim Identifier is the unique identifier for a Claim.,
	Claim_Offer_Identifier int  NULL COMMENT Claim Offer Identifier is the unique identifier for a Claim Offer.,
	Amount_Type_Code     varchar(20)  NULL COMMENT Amount Type Code defines the category to which a monetary amount will be applied. Example:  premium, commission, tax, surcharge.,
	Event_Date           datetime  NULL COMMENT Event Date is the date on which a transaction or insurance-related happening takes place.,
	Claim_Amount         decimal(15,2)  NULL COMMENT The money being paid or collected for settling a claim and paying the claimants, reinsurers, other insurers, and other interested parties. Claim amounts are classified by various attributes.,
	Insurance_Type_Code  char(1)  NULL COMMENT  Insurance Type Code represents the category under which risk is assumed.  Examples: Direct for policies directly issued by a company; Assumed for risks assumed from another company; Ceded for portions of risk ceded to another insurer.,
	 PRIMARY KEY (Claim_Amount_Identifier ASC),
	 FOREIGN KEY (Claim_Offer_Identifier) REFERENCES Claim_Offer(Claim_Offer_Identifier),
 FOREIGN KEY (Claim_Identifier) REFERENCES Claim(Claim_Identifier)
)
"#;

    #[test]
    fn claim_amount_listing() {
        let m = parse_ddl(CLAIM_AMOUNT).unwrap();
        assert_eq!(m.tables.len(), 1);
        let t = &m.tables[0];
        assert_eq!(t.name, "Claim_Amount");
        assert_eq!(t.attributes.len(), 7);
        assert_eq!(t.primary_key, alloc::vec!["Claim_Amount_Identifier".to_string()]);
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[0].to_table, "Claim_Offer");
        assert_eq!(m.constraints[1].to_table, "Claim");
        assert!(t.attributes[0]
            .description
            .starts_with("Claim Amount Identifier is the unique identifier"));
        assert!(t.attributes[3].description.ends_with("premium, commission, tax, surcharge."));
        assert_eq!(t.attributes[5].sql_type, "decimal(15,2)");
        assert_eq!(t.attributes[1].nullability_default, "NOT NULL");
    }

    #[test]
    fn pk_as_fk_is_one_to_one() {
        let src = "CREATE TABLE Claim_Reserve\n( \n\tClaim_Amount_Identifier bigint  NOT NULL COMMENT The amount of expected loss over the life of the Claim.,\n\t PRIMARY KEY (Claim_Amount_Identifier ASC),\n\t FOREIGN KEY (Claim_Amount_Identifier) REFERENCES Claim_Amount(Claim_Amount_Identifier)\n)";
        let m = parse_ddl(src).unwrap();
        assert_eq!(m.constraints[0].kind, Cardinality::OneToOne);
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_ddl("").unwrap(), DatabaseModel::default());
        assert_eq!(parse_ddl("  -- nothing\n").unwrap(), DatabaseModel::default());
    }

    #[test]
    fn rejects_other_statements() {
        let err = parse_ddl("CREATE TABLE a (id int);\nINSERT INTO a VALUES (1);").unwrap_err();
        match err {
            DdlError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_table() {
        let err = parse_ddl("CREATE TABLE a (id int); CREATE TABLE a (id int);").unwrap_err();
        assert_eq!(err, DdlError::DuplicateTable("a".into()));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_ddl("CREATE TABLE a (\n  id int,\n  PRIMARY KEY id\n)").unwrap_err();
        assert_eq!(
            err,
            DdlError::Syntax {
                line: 3,
                column: 15,
                message: "expected `(`".into()
            }
        );
    }

    #[test]
    fn quoted_comment_with_comma_and_quote() {
        let m = parse_ddl("CREATE TABLE t (a int COMMENT 'x, y ''z''', PRIMARY KEY (a)) COMMENT 'tbl';").unwrap();
        assert_eq!(m.tables[0].attributes[0].description, "x, y 'z'");
        assert_eq!(m.tables[0].description, "tbl");
    }
}
