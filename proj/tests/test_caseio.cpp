#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "mcpf/caseio.hpp"
#include "mcpf/errors.hpp"
#include "testcases.hpp"

using namespace mcpf;

namespace {

const char* kMinimalCase = R"({
  "ac_buses": [
    { "id": "a", "is_reference": true },
    { "id": "b" }
  ],
  "ac_branches": [ { "id": "l", "from": "a", "to": "b", "g": 0.5, "b": -8.0 } ],
  "generators": [ { "id": "g", "bus": "a", "u_mag_set": 1.0 } ],
  "loads_ac": [ { "id": "m", "bus": "b", "p_set": 0.4, "q_set": 0.05 } ]
})";

} // namespace

TEST_CASE("a minimal document parses and solves") {
    const NetworkCase net = parse_case(kMinimalCase);
    CHECK(net.ac_buses.size() == 2);
    const Solution sol = solve(net);
    CHECK(sol.converged);
}

TEST_CASE("round trip preserves the case") {
    const NetworkCase first = testcases::load_bundled("paper_bipolar.json");
    const NetworkCase second = parse_case(write_case(first));
    // canonical serialization makes equality visible
    CHECK(write_case(first) == write_case(second));
}

TEST_CASE("round trip covers every element kind") {
    const NetworkCase first = testcases::load_bundled("ground_return_monopole.json");
    const NetworkCase second = parse_case(write_case(first));
    CHECK(write_case(first) == write_case(second));
    CHECK(second.dc_loads.size() == 1);
    CHECK(second.ac_loads.size() == 1);
}

TEST_CASE("schema violations are named") {
    SUBCASE("droop without a gain") {
        std::string doc = R"({
          "ac_buses": [ { "id": "a", "is_reference": true } ],
          "generators": [ { "id": "g", "bus": "a" } ],
          "dc_buses": [ { "id": "d", "terminals": ["positive", "neutral"], "grounded": true } ],
          "converters": [ {
            "id": "c", "ac_bus": "a", "dc_bus": "d", "polarity": "positive",
            "transformer": { "r": 0.001, "x": 0.1 },
            "reactor": { "r": 0.001, "x": 0.08 },
            "control": {
              "d_axis": { "mode": "dc_droop", "u_dc_ref": 1.0, "p_ac_ref": 0.1 },
              "q_axis": { "mode": "q", "q_ref": 0.0 }
            }
          } ]
        })";
        try {
            parse_case(doc);
            FAIL("expected SchemaError");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaError);
            CHECK(std::string(e.what()).find("k") != std::string::npos);
        }
    }
    SUBCASE("duplicate bus id") {
        std::string doc = R"({
          "ac_buses": [ { "id": "a", "is_reference": true }, { "id": "a" } ],
          "generators": [ { "id": "g", "bus": "a" } ]
        })";
        CHECK_THROWS_AS(parse_case(doc), Error);
    }
    SUBCASE("unknown keys are rejected") {
        std::string doc = R"({ "ac_buses": [ { "id": "a", "is_reference": true, "vmax": 1.1 } ] })";
        CHECK_THROWS_WITH_AS(parse_case_document(doc), doctest::Contains("vmax"), Error);
    }
    SUBCASE("missing control axis") {
        std::string doc = R"({
          "ac_buses": [ { "id": "a", "is_reference": true } ],
          "converters": [ {
            "id": "c", "ac_bus": "a", "dc_bus": "d", "polarity": "positive",
            "transformer": { "r": 0.001, "x": 0.1 },
            "reactor": { "r": 0.001, "x": 0.08 },
            "control": { "d_axis": { "mode": "udc", "u_dc_ref": 1.0 } }
          } ]
        })";
        CHECK_THROWS_WITH_AS(parse_case_document(doc), doctest::Contains("q_axis"), Error);
    }
}

TEST_CASE("syntax errors carry line and column") {
    try {
        parse_case_document("{\n  \"ac_buses\": [\n    { \"id\": }\n  ]\n}");
        FAIL("expected SyntaxError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SyntaxError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("validation failures surface through parse_case") {
    // two reference buses in one island
    std::string doc = R"({
      "ac_buses": [ { "id": "a", "is_reference": true }, { "id": "b", "is_reference": true } ],
      "ac_branches": [ { "id": "l", "from": "a", "to": "b", "g": 0.5, "b": -8.0 } ],
      "generators": [ { "id": "g", "bus": "a" } ]
    })";
    CHECK_NOTHROW(parse_case_document(doc));
    CHECK_THROWS_WITH_AS(parse_case(doc), doctest::Contains("MissingReferenceBus"), Error);
}

TEST_CASE("csv and json carry identical full-precision values") {
    const NetworkCase net = parse_case(kMinimalCase);
    const Solution sol = solve(net);
    REQUIRE(sol.converged);

    const std::string csv = write_results(sol, OutputFormat::Csv);
    const auto json = nlohmann::json::parse(write_results(sol, OutputFormat::Json));

    double csv_u = 0.0;
    for (std::size_t pos = 0; (pos = csv.find("ac_bus,b,u_mag,", pos)) != std::string::npos;) {
        csv_u = std::stod(csv.substr(pos + std::string("ac_bus,b,u_mag,").size()));
        break;
    }
    double json_u = 0.0;
    for (const auto& bus : json["ac_buses"])
        if (bus["id"] == "b") json_u = bus["u_mag"];
    CHECK(csv_u == json_u);

    // table mode is a 6-decimal rendering of the same quantity
    const std::string table = write_results(sol, OutputFormat::Table);
    char rendered[32];
    std::snprintf(rendered, sizeof rendered, "%.6f", json_u);
    CHECK(table.find(rendered) != std::string::npos);
}

TEST_CASE("pure AC results omit the DC sections") {
    const NetworkCase net = parse_case(kMinimalCase);
    const Solution sol = solve(net);
    const std::string table = write_results(sol, OutputFormat::Table);
    CHECK(table.find("DC bus voltages") == std::string::npos);
    const auto json = nlohmann::json::parse(write_results(sol, OutputFormat::Json));
    CHECK_FALSE(json.contains("dc_terminals"));
}

TEST_CASE("contingency emission carries before/after/deviation triplets") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    const Solution base = solve(net);
    const ContingencyReport rep = run_contingency(net, base, ConverterPoleOutage{"1N"}, {});

    const std::string csv = write_results(rep, OutputFormat::Csv);
    CHECK(csv.rfind("section,id,field,before,after,deviation", 0) == 0);
    CHECK(csv.find("converter,1N,p_pcc,") != std::string::npos);

    const auto json = nlohmann::json::parse(write_results(rep, OutputFormat::Json));
    const auto& first = json["deviations"]["converters"][0];
    const double before = first["p_pcc"]["before"];
    const double after = first["p_pcc"]["after"];
    const double dev = first["p_pcc"]["deviation"];
    CHECK(dev == doctest::Approx(after - before).epsilon(1e-14));
}

TEST_CASE("unknown output format is rejected") {
    CHECK_THROWS_AS(parse_format("xml"), Error);
}
