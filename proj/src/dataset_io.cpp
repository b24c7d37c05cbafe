#include "gsim/dataset_io.hpp"

#include "gsim/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace gsim {

using Json = nlohmann::ordered_json;

namespace {

Json attr_to_json(const AttrValue& v) {
    return std::visit([](const auto& x) { return Json(x); }, v);
}

AttrValue attr_from_json(const Json& j, AttrKind kind) {
    switch (kind) {
    case AttrKind::Int:
        if (!j.is_number_integer()) throw SchemaError("expected int attribute");
        return j.get<std::int64_t>();
    case AttrKind::Float:
        if (!j.is_number()) throw SchemaError("expected float attribute");
        return j.get<double>();
    case AttrKind::Bool:
        if (!j.is_boolean()) throw SchemaError("expected bool attribute");
        return j.get<bool>();
    case AttrKind::Symbol:
        if (!j.is_string()) throw SchemaError("expected symbol attribute");
        return j.get<std::string>();
    }
    throw SchemaError("unknown attribute kind");
}

Json value_to_json(const StateValue& value) {
    switch (kind_of(value)) {
    case ValueKind::Int: return Json(std::get<std::int64_t>(value));
    case ValueKind::Float: return Json(std::get<double>(value));
    case ValueKind::Pipeline: {
        Json entries = Json::array();
        for (const auto& e : std::get<Pipeline>(value)) entries.push_back(Json::array({e.quantity, e.timer}));
        return Json{{"pipeline", entries}};
    }
    case ValueKind::Records: {
        const auto& records = std::get<RecordList>(value);
        Json schema = Json::array();
        for (const auto& [name, kind] : records.schema().attrs) schema.push_back(Json::array({name, to_string(kind)}));
        Json rows = Json::array();
        for (std::size_t r = 0; r < records.size(); ++r) {
            Json row = Json::array();
            for (const auto& cell : records.row(r)) row.push_back(attr_to_json(cell));
            rows.push_back(std::move(row));
        }
        return Json{{"schema", schema}, {"rows", rows}};
    }
    }
    return {};
}

StateValue value_from_json(const Json& j) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_object() && j.contains("pipeline")) {
        Pipeline p;
        for (const auto& e : j.at("pipeline")) {
            if (!e.is_array() || e.size() != 2) throw SchemaError("pipeline entry must be [quantity, timer]");
            p.push_back({e[0].get<std::int64_t>(), e[1].get<std::int64_t>()});
        }
        return p;
    }
    if (j.is_object() && j.contains("schema") && j.contains("rows")) {
        auto schema = std::make_shared<RecordSchema>();
        for (const auto& a : j.at("schema")) {
            const auto kind = attr_kind_from(a.at(1).get<std::string>());
            if (!kind) throw SchemaError("unknown attribute kind");
            schema->attrs.emplace_back(a.at(0).get<std::string>(), *kind);
        }
        RecordList records(std::move(schema));
        for (const auto& row : j.at("rows")) {
            if (!row.is_array() || row.size() != records.schema().size()) throw SchemaError("record arity mismatch");
            std::vector<AttrValue> cells;
            for (std::size_t i = 0; i < row.size(); ++i) cells.push_back(attr_from_json(row[i], records.schema().attrs[i].second));
            records.push_back(std::move(cells));
        }
        return records;
    }
    throw SchemaError("unrecognised state value");
}

Json state_json(const SystemState& state) {
    Json out = Json::object();
    for (std::size_t i = 0; i < state.size(); ++i) out[state.name(i)] = value_to_json(state.value(i));
    return out;
}

SystemState state_from(const Json& j) {
    if (!j.is_object()) throw SchemaError("state must be an object");
    SystemState s;
    for (const auto& [name, value] : j.items()) s.set(name, value_from_json(value));
    return s;
}

Json projection_json(const ProjectionSpec& projection) {
    Json dims = Json::array();
    for (const auto& d : projection.dims) {
        Json rule = std::visit(
            [](const auto& r) -> Json {
                using R = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<R, ScalarField>) {
                    return Json{{"kind", "scalar"}, {"field", r.field}};
                } else if constexpr (std::is_same_v<R, ListTotal>) {
                    return Json{{"kind", "total"}, {"field", r.field}};
                } else {
                    return Json{{"kind", "count"}, {"field", r.field}, {"attr", r.attr}, {"equals", attr_to_json(r.equals)}};
                }
            },
            d.rule);
        rule["name"] = d.name;
        dims.push_back(std::move(rule));
    }
    return dims;
}

ProjectionSpec projection_from(const Json& j) {
    ProjectionSpec spec;
    for (const auto& d : j) {
        const auto kind = d.at("kind").get<std::string>();
        ProjectionDim dim{d.at("name").get<std::string>(), ScalarField{}};
        const auto field = d.at("field").get<std::string>();
        if (kind == "scalar") {
            dim.rule = ScalarField{field};
        } else if (kind == "total") {
            dim.rule = ListTotal{field};
        } else if (kind == "count") {
            const auto& eq = d.at("equals");
            AttrValue equals = eq.is_boolean() ? AttrValue(eq.get<bool>())
                               : eq.is_number_integer() ? AttrValue(eq.get<std::int64_t>())
                               : eq.is_number() ? AttrValue(eq.get<double>())
                                                : AttrValue(eq.get<std::string>());
            dim.rule = RecordCount{field, d.at("attr").get<std::string>(), equals};
        } else {
            throw SchemaError("unknown projection rule '" + kind + "'");
        }
        spec.dims.push_back(std::move(dim));
    }
    return spec;
}

} // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
    Json meta{{"format", "gsim-dataset"},
              {"version", 1},
              {"env", dataset.env_name},
              {"horizon", dataset.horizon()},
              {"count", dataset.size()},
              {"projection", projection_json(dataset.projection)}};
    out << meta.dump() << '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& traj = dataset.trajectories[i];
        Json steps = Json::array();
        for (const auto& step : traj.steps) {
            steps.push_back(Json{{"action", step.action ? Json(*step.action) : Json(nullptr)}, {"next", state_json(step.next)}});
        }
        Json line{{"schema", dataset.env_name},
                  {"split", to_string(dataset.splits[i])},
                  {"init", state_json(traj.init)},
                  {"steps", std::move(steps)}};
        out << line.dump() << '\n';
    }
}

Dataset read_dataset(std::istream& in) {
    Dataset dataset;
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected = 0;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const Json j = Json::parse(line);
            if (!have_meta) {
                if (j.value("format", "") != "gsim-dataset") throw SchemaError("missing dataset metadata record");
                dataset.env_name = j.at("env").get<std::string>();
                dataset.projection = projection_from(j.at("projection"));
                expected = j.at("count").get<std::size_t>();
                have_meta = true;
                continue;
            }
            Trajectory traj;
            traj.init = state_from(j.at("init"));
            for (const auto& step : j.at("steps")) {
                Action action;
                if (!step.at("action").is_null()) action = step.at("action").get<std::int64_t>();
                traj.steps.push_back({action, state_from(step.at("next"))});
            }
            const auto split = split_from(j.value("split", "none"));
            if (!split) throw SchemaError("unknown split label");
            dataset.push_back(std::move(traj), *split);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("malformed dataset record: ") + e.what(), line_no);
        }
    }
    if (!have_meta) throw ParseError("empty dataset file (no metadata record)", 1);
    if (dataset.size() != expected) {
        throw ParseError("dataset declares " + std::to_string(expected) + " trajectories but has " +
                             std::to_string(dataset.size()) + " (truncated?)",
                         line_no + 1);
    }
    return dataset;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    write_dataset(out, dataset);
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_dataset(in);
}

std::string state_to_json(const SystemState& state) {
    return state_json(state).dump();
}

SystemState state_from_json(const std::string& text) {
    return state_from(Json::parse(text));
}

} // namespace gsim
