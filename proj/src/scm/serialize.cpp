#include "causalmine/scm/serialize.hpp"

namespace causalmine::scm {

using nlohmann::json;

json to_json(const StructuralExpr& e) {
    using Op = StructuralExpr::Op;
    json j;
    switch (e.op) {
        case Op::Const:
            j["op"] = "const";
            j["value"] = e.value;
            break;
        case Op::Parent:
            j["op"] = "parent";
            j["index"] = e.parent;
            break;
        case Op::Noise:
            j["op"] = "noise";
            break;
        case Op::Add:
        case Op::Mul:
            j["op"] = e.op == Op::Add ? "add" : "mul";
            j["args"] = {to_json(e.args[0]), to_json(e.args[1])};
            break;
        case Op::Linear:
            j["op"] = "linear";
            j["weights"] = e.weights;
            j["bias"] = e.bias;
            j["noise_coeff"] = e.noise_coeff;
            break;
        case Op::Gate:
            j["op"] = "gate";
            j["threshold"] = e.threshold;
            j["args"] = {to_json(e.args[0]), to_json(e.args[1]), to_json(e.args[2])};
            break;
        case Op::Table: {
            j["op"] = "table";
            json rows = json::array();
            for (const auto& r : e.rows) rows.push_back({{"key", r.key}, {"value", r.value}});
            j["rows"] = std::move(rows);
            j["default"] = e.table_default;
            break;
        }
    }
    return j;
}

StructuralExpr expr_from_json(const json& j) {
    const std::string op = j.at("op").get<std::string>();
    if (op == "const") return StructuralExpr::constant(j.at("value").get<double>());
    if (op == "parent") return StructuralExpr::parent_ref(j.at("index").get<int>());
    if (op == "noise") return StructuralExpr::noise_ref();
    if (op == "add" || op == "mul") {
        auto lhs = expr_from_json(j.at("args").at(0));
        auto rhs = expr_from_json(j.at("args").at(1));
        return op == "add" ? StructuralExpr::add(std::move(lhs), std::move(rhs))
                           : StructuralExpr::mul(std::move(lhs), std::move(rhs));
    }
    if (op == "linear")
        return StructuralExpr::linear(j.at("weights").get<std::vector<double>>(),
                                      j.at("bias").get<double>(), j.at("noise_coeff").get<double>());
    if (op == "gate")
        return StructuralExpr::gate(expr_from_json(j.at("args").at(0)), j.at("threshold").get<double>(),
                                    expr_from_json(j.at("args").at(1)), expr_from_json(j.at("args").at(2)));
    if (op == "table") {
        std::vector<StructuralExpr::TableRow> rows;
        for (const auto& r : j.at("rows"))
            rows.push_back({r.at("key").get<std::vector<double>>(), r.at("value").get<double>()});
        return StructuralExpr::table(std::move(rows), j.at("default").get<double>());
    }
    throw ValidationError("unknown expression op: " + op);
}

json to_json(const Scm& scm) {
    json j;
    json exo = json::array();
    for (const auto& e : scm.exogenous) {
        json d;
        if (e.dist.kind == NoiseDistribution::Kind::Gaussian)
            d = {{"kind", "gaussian"}, {"mean", e.dist.mean}, {"variance", e.dist.variance}};
        else
            d = {{"kind", "categorical"}, {"probabilities", e.dist.probabilities}};
        exo.push_back({{"name", e.name}, {"dist", std::move(d)}});
    }
    j["exogenous"] = std::move(exo);
    json endo = json::array();
    for (const auto& v : scm.endogenous) {
        endo.push_back({{"name", v.name},
                        {"parents", v.parents},
                        {"noise", v.noise},
                        {"mechanism", to_json(v.mechanism)}});
    }
    j["endogenous"] = std::move(endo);
    json labels;
    labels["state"] = scm.labels.state;
    labels["action"] = scm.labels.action;
    labels["observation"] = scm.labels.observation;
    labels["reward"] = scm.labels.reward;
    labels["confounder"] = scm.labels.confounder;
    labels["next"] = scm.labels.next_of;
    j["labels"] = std::move(labels);
    return j;
}

Scm scm_from_json(const json& j) {
    Scm scm;
    for (const auto& e : j.at("exogenous")) {
        ExogenousVar x;
        x.name = e.at("name").get<std::string>();
        const auto& d = e.at("dist");
        if (d.at("kind") == "gaussian")
            x.dist = NoiseDistribution::gaussian(d.at("mean").get<double>(), d.at("variance").get<double>());
        else if (d.at("kind") == "categorical")
            x.dist = NoiseDistribution::categorical(d.at("probabilities").get<std::vector<double>>());
        else
            throw ValidationError("unknown distribution kind");
        scm.exogenous.push_back(std::move(x));
    }
    for (const auto& e : j.at("endogenous")) {
        EndogenousVar v;
        v.name = e.at("name").get<std::string>();
        v.parents = e.at("parents").get<std::vector<std::string>>();
        if (e.contains("noise")) v.noise = e.at("noise").get<std::string>();
        v.mechanism = expr_from_json(e.at("mechanism"));
        scm.endogenous.push_back(std::move(v));
    }
    if (j.contains("labels")) {
        const auto& l = j.at("labels");
        auto get = [&](const char* k) {
            return l.contains(k) ? l.at(k).get<std::vector<std::string>>() : std::vector<std::string>{};
        };
        scm.labels.state = get("state");
        scm.labels.action = get("action");
        scm.labels.observation = get("observation");
        scm.labels.reward = get("reward");
        scm.labels.confounder = get("confounder");
        if (l.contains("next")) scm.labels.next_of = l.at("next").get<std::map<std::string, std::string>>();
    }
    scm.validate();
    return scm;
}

std::string emit(const Scm& scm) { return to_json(scm).dump(2); }

Scm parse(const std::string& text) { return scm_from_json(json::parse(text)); }

std::string canonical_key(const Scm& scm) { return to_json(scm).dump(); }

}  // namespace causalmine::scm
