#include "cola/ablation.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cola/trainer.hpp"

namespace cola {

std::vector<AblationRow> ablation_matrix(std::string_view name) {
    //                 label        lqa    AT     copy   zconv  freeze md
    if (name == "components") {
        return {{"Baseline", false, false, false, false, false, false},
                {"+LQA", true, false, false, false, false, false},
                {"+CD", false, true, true, true, true, true},
                {"+LQA+CD", true, true, true, true, true, true}};
    }
    if (name == "cd") {
        return {{"(a)", true, false, false, false, false, false}, {"(b)", true, true, true, false, false, false},
                {"(c)", true, true, true, true, false, false},    {"(d)", true, true, false, false, false, true},
                {"(e)", true, true, true, true, false, true},     {"(f)", true, true, true, true, true, false},
                {"(g)", true, true, true, false, true, true},     {"(h)", true, true, true, true, true, true}};
    }
    if (name == "complete") {
        return {{"(a)", true, false, false, false, false, false},
                {"(b)", true, true, false, false, false, false},
                {"(c)", true, true, false, false, false, true},
                {"(d)", true, true, true, true, false, false},
                {"(e)", true, true, true, true, true, true}};
    }
    throw std::invalid_argument("unknown ablation matrix '" + std::string(name) + "' (components, cd, complete)");
}

RunConfig row_config(const RunConfig& base, const AblationRow& row) {
    RunConfig c = base;
    c.model.use_lqa = row.lqa;
    c.stage2.copy = row.copy;
    c.stage2.zero_conv = row.zero_conv;
    c.stage2.freeze = row.freeze;
    c.stage2.modality_dropout = row.modality_dropout;
    if (!row.additional_training) c.stage2.epochs = 0;
    return c;
}

std::vector<AblationResult> run_ablation(std::string_view matrix, const RunConfig& base, const Dataset& train,
                                         const Dataset& test, const AblationProgress& progress) {
    const auto rows = ablation_matrix(matrix);
    std::map<bool, ModelState> stage1;
    std::vector<AblationResult> out;
    for (const auto& row : rows) {
        if (progress) progress(row);
        const RunConfig cfg = row_config(base, row);
        auto it = stage1.find(row.lqa);
        if (it == stage1.end()) it = stage1.emplace(row.lqa, train_stage1(train, cfg.stage1, cfg.model)).first;
        AblationResult r;
        r.row = row;
        r.config = to_json(cfg);
        r.config["additional_training"] = row.additional_training;
        if (row.additional_training) {
            const ModelState s2 = train_stage2(it->second, train, cfg.stage2);
            r.report = evaluate(s2, test, cfg.metrics);
        } else {
            r.report = evaluate(it->second, test, cfg.metrics);
        }
        r.report.config_digest = config_digest(cfg);
        out.push_back(std::move(r));
    }
    return out;
}

Json ablation_to_json(std::string_view matrix, const std::vector<AblationResult>& results) {
    Json j;
    j["matrix"] = matrix;
    j["rows"] = Json::array();
    for (const auto& r : results) {
        Json row;
        row["label"] = r.row.label;
        row["toggles"] = {{"lqa", r.row.lqa},
                          {"additional_training", r.row.additional_training},
                          {"copy", r.row.copy},
                          {"zero_conv", r.row.zero_conv},
                          {"freeze", r.row.freeze},
                          {"modality_dropout", r.row.modality_dropout}};
        row["config"] = r.config;
        row["report"] = report_to_json(r.report);
        j["rows"].push_back(std::move(row));
    }
    return j;
}

std::string ablation_table(std::string_view matrix, const std::vector<AblationResult>& results) {
    std::ostringstream os;
    char buf[256];
    const bool components = matrix == "components";
    const bool complete = matrix == "complete";
    auto mark = [](bool b) { return b ? "x" : "."; };
    if (components) std::snprintf(buf, sizeof buf, "%-9s", "");
    else if (complete) std::snprintf(buf, sizeof buf, "%-4s %3s %4s %6s %6s %3s", "", "AT", "Copy", "Z-Conv", "Freeze", "MD");
    else std::snprintf(buf, sizeof buf, "%-4s %4s %6s %6s %3s", "", "Copy", "Z-Conv", "Freeze", "MD");
    os << buf;
    for (const char* block : {"Complete", "Missing m1", "Missing m2", "Average"}) {
        std::snprintf(buf, sizeof buf, " | %-27s", block);
        os << buf;
    }
    os << '\n';
    os << std::string(complete ? 30 : components ? 9 : 26, ' ');
    for (int k = 0; k < 4; ++k) os << " |  S_a    E_m    F_b    MAE  ";
    os << '\n';
    for (const auto& r : results) {
        const auto& t = r.row;
        if (components) std::snprintf(buf, sizeof buf, "%-9s", t.label.c_str());
        else if (complete)
            std::snprintf(buf, sizeof buf, "%-4s %3s %4s %6s %6s %3s", t.label.c_str(), mark(t.additional_training),
                          mark(t.copy), mark(t.zero_conv), mark(t.freeze), mark(t.modality_dropout));
        else
            std::snprintf(buf, sizeof buf, "%-4s %4s %6s %6s %3s", t.label.c_str(), mark(t.copy), mark(t.zero_conv),
                          mark(t.freeze), mark(t.modality_dropout));
        os << buf;
        auto cells = [&](const MetricSet& m) {
            std::snprintf(buf, sizeof buf, " | %.3f  %.3f  %.3f  %.3f", m.s_alpha, m.e_m, m.f_beta, m.mae);
            os << buf;
        };
        for (const auto& c : r.report.conditions) cells(c);
        cells(r.report.average);
        os << '\n';
    }
    return os.str();
}

}  // namespace cola
