//! Table descriptions requested from the model when the schema has none.

use alloc::format;
use alloc::string::String;

use crate::error::LlmError;
use crate::llm::{CompletionRequest, LlmClient};
use crate::model::{DatabaseModel, TableDef};

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.into()
    }
}

/// Description request followed by the column sheet of `table`.
pub fn render_prompt_d(table: &TableDef) -> String {
    let mut out = format!("Give me a very brief description of the {} table.\n\n", table.name);
    out.push_str("original_column_name,column_name,column_description,data_format,value_description\n");
    for a in &table.attributes {
        out.push_str(&format!(
            "{},,{},{},\n",
            csv_cell(&a.name),
            csv_cell(&a.description),
            csv_cell(&a.sql_type.to_lowercase())
        ));
    }
    out
}

/// One-sample description of `table`, trimmed.
pub fn describe_table<L: LlmClient + ?Sized>(llm: &L, table: &TableDef, temperature: f64) -> Result<String, LlmError> {
    let answers = llm.complete(&CompletionRequest::new(render_prompt_d(table), 1, temperature))?;
    Ok(answers.into_iter().next().unwrap_or_default().trim().into())
}

/// Fills every empty table description with a generated one. Tables that
/// already have a description cause no request.
pub fn build_descriptions<L: LlmClient + ?Sized>(
    model: &DatabaseModel,
    llm: &L,
    temperature: f64,
) -> Result<DatabaseModel, (String, LlmError)> {
    let mut out = model.clone();
    for t in &mut out.tables {
        if t.description.trim().is_empty() {
            t.description = describe_table(llm, t, temperature).map_err(|e| (t.name.clone(), e))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AttributeDef;

    #[test]
    fn prompt_lists_columns() {
        let mut t = TableDef::new("Loan");
        t.attributes.push(AttributeDef::new("loan_id", "INTEGER").described("the id number identifying the loan data"));
        t.attributes.push(AttributeDef::new("status", "TEXT").described("'A' stands for finished, no problems"));
        let p = render_prompt_d(&t);
        assert!(p.starts_with("Give me a very brief description of the Loan table.\n"));
        assert!(p.contains("loan_id,,the id number identifying the loan data,integer,\n"));
        assert!(p.contains("status,,\"'A' stands for finished, no problems\",text,\n"));
    }
}
