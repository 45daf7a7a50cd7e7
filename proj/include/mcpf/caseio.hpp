#pragma once

// Case-file parsing (JSON) and result emission. The schema is documented
// in docs/case_format.md; cases/paper_bipolar.json is the canonical
// example.

#include <string>

#include "mcpf/contingency.hpp"
#include "mcpf/network.hpp"
#include "mcpf/solver.hpp"

namespace mcpf {

// Syntax and schema only: throws SyntaxError (with line/column) or
// SchemaError (naming the offending field). Unknown keys are rejected.
NetworkCase parse_case_document(const std::string& text);

// parse_case_document plus validation; validation failures surface as
// SchemaError with the report text.
NetworkCase parse_case(const std::string& text);

NetworkCase load_case_file(const std::string& path);

// Serializes a case back to the document schema (used for round-trip
// checks and case generation).
std::string write_case(const NetworkCase& net);

enum class OutputFormat { Table, Csv, Json };

OutputFormat parse_format(const std::string& name);  // throws SchemaError

// Deterministic, id-ordered emission. Table mode renders 6 decimals; csv
// and json carry full precision.
std::string write_results(const Solution& solution, OutputFormat format);
std::string write_results(const ContingencyReport& report, OutputFormat format);

} // namespace mcpf
