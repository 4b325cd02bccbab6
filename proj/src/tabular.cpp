#include "geb/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace geb {

using nlohmann::json;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

bool Instance::has_needle() const {
    return !needle.empty() &&
           std::all_of(needle.begin(), needle.end(), [](int k) { return k >= 0; });
}

void Instance::validate() const {
    const int n = ref_policy.rows;
    const int m = ref_policy.cols;
    if (n <= 0 || m < 2) throw ConfigError("instance needs >=1 prompt and >=2 responses");
    if (static_cast<int>(prompt_weights.size()) != n)
        throw ConfigError("prompt_weights size does not match ref_policy rows");
    if (!true_reward.same_shape(ref_policy))
        throw ConfigError("true_reward shape does not match ref_policy");
    double wsum = 0.0;
    for (double w : prompt_weights) {
        if (!(w >= 0.0)) throw ConfigError("prompt weights must be non-negative");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > kRowSumTol)
        throw ConfigError("prompt_weights must sum to 1 within 1e-12");
    for (int x = 0; x < n; ++x) {
        double s = 0.0;
        for (int y = 0; y < m; ++y) {
            const double p = ref_policy.at(x, y);
            if (!(p >= kProbFloor))
                throw ConfigError("ref_policy entry below probability floor at (" +
                                  std::to_string(x) + "," + std::to_string(y) + ")");
            s += p;
        }
        if (std::abs(s - 1.0) > kRowSumTol)
            throw ConfigError("ref_policy row " + std::to_string(x) + " does not sum to 1");
    }
    for (double r : true_reward.data)
        if (!(std::abs(r) <= r_max))
            throw ConfigError("true_reward entry exceeds r_max=" + std::to_string(r_max));
    if (!needle.empty()) {
        if (static_cast<int>(needle.size()) != n)
            throw ConfigError("needle size does not match prompt count");
        for (int k : needle)
            if (k < -1 || k >= m) throw ConfigError("needle index out of range");
    }
}

std::string Instance::to_json() const {
    json j;
    j["prompt_weights"] = prompt_weights;
    auto table_to_json = [](const Table& t) {
        json rows = json::array();
        for (int x = 0; x < t.rows; ++x)
            rows.push_back(std::vector<double>(t.row(x), t.row(x) + t.cols));
        return rows;
    };
    j["ref_policy"] = table_to_json(ref_policy);
    j["true_reward"] = table_to_json(true_reward);
    if (!needle.empty()) j["needle"] = needle;
    return j.dump(2);
}

Instance Instance::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("instance JSON parse error: ") + e.what());
    }
    auto table_from_json = [](const json& rows) {
        Table t(static_cast<int>(rows.size()),
                rows.empty() ? 0 : static_cast<int>(rows.at(0).size()));
        for (int x = 0; x < t.rows; ++x) {
            const auto& row = rows.at(x);
            if (static_cast<int>(row.size()) != t.cols)
                throw ConfigError("instance JSON has ragged rows");
            for (int y = 0; y < t.cols; ++y) t.at(x, y) = row.at(y).get<double>();
        }
        return t;
    };
    Instance inst;
    try {
        inst.prompt_weights = j.at("prompt_weights").get<std::vector<double>>();
        inst.ref_policy = table_from_json(j.at("ref_policy"));
        inst.true_reward = table_from_json(j.at("true_reward"));
        if (j.contains("needle")) inst.needle = j.at("needle").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("instance JSON missing/invalid field: ") + e.what());
    }
    inst.validate();
    return inst;
}

void Instance::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write instance file: " + path);
    out << to_json() << "\n";
}

Instance Instance::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read instance file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

PolicyTable softmax_policy(const PolicyLogits& logits) {
    if (!logits.theta.all_finite()) throw NumericError("softmax_policy: non-finite logits");
    const int n = logits.theta.rows;
    const int m = logits.theta.cols;
    PolicyTable pi{Table(n, m)};
    for (int x = 0; x < n; ++x) {
        const double* th = logits.theta.row(x);
        double mx = th[0];
        for (int y = 1; y < m; ++y) mx = std::max(mx, th[y]);
        double z = 0.0;
        double* p = pi.probs.row(x);
        for (int y = 0; y < m; ++y) {
            p[y] = std::exp(th[y] - mx);
            z += p[y];
        }
        bool floored = false;
        for (int y = 0; y < m; ++y) {
            p[y] /= z;
            if (p[y] < kProbFloor) {
                p[y] = kProbFloor;
                floored = true;
            }
        }
        if (floored) {
            double s = 0.0;
            for (int y = 0; y < m; ++y) s += p[y];
            for (int y = 0; y < m; ++y) p[y] /= s;
        }
    }
    return pi;
}

PolicyLogits logits_from_policy(const Table& probs) {
    PolicyLogits lg{Table(probs.rows, probs.cols)};
    for (std::size_t i = 0; i < probs.data.size(); ++i)
        lg.theta.data[i] = std::log(std::max(probs.data[i], kProbFloor));
    return lg;
}

double bt_preference_prob(const Instance& inst, int x, int y1, int y2) {
    if (x < 0 || x >= inst.n_prompts() || y1 < 0 || y1 >= inst.n_responses() || y2 < 0 ||
        y2 >= inst.n_responses())
        throw DomainError("bt_preference_prob: index out of range");
    return sigmoid(inst.true_reward.at(x, y1) - inst.true_reward.at(x, y2));
}

int sample_response(const PolicyTable& policy, int x, Rng& rng) {
    return rng.categorical({policy.probs.row(x), static_cast<std::size_t>(policy.probs.cols)});
}

PreferencePair annotate_pair(const Instance& inst, int x, int y1, int y2, Rng& rng,
                             bool deterministic) {
    if (y1 == y2) throw DomainError("annotate_pair: y1 and y2 must differ");
    const double p1 = bt_preference_prob(inst, x, y1, y2);
    bool y1_wins;
    if (deterministic) {
        const double r1 = inst.true_reward.at(x, y1);
        const double r2 = inst.true_reward.at(x, y2);
        y1_wins = (r1 > r2) || (r1 == r2 && y1 < y2);
    } else {
        y1_wins = rng.uniform01() < p1;
    }
    return y1_wins ? PreferencePair{x, y1, y2} : PreferencePair{x, y2, y1};
}

Instance generate_needle_instance(int n_prompts, int m_responses, double needle_ref_mass,
                                  double reward_gap, Rng& rng, double r_max) {
    if (n_prompts < 1 || m_responses < 2)
        throw ConfigError("generate_needle_instance: need >=1 prompt and >=2 responses");
    if (!(needle_ref_mass > 0.0) || !(needle_ref_mass < 1.0 / m_responses))
        throw ConfigError("needle_ref_mass must lie strictly in (0, 1/m_responses)");
    if (!(reward_gap > 0.0)) throw ConfigError("reward_gap must be positive");
    if (reward_gap > r_max) throw ConfigError("reward_gap exceeds r_max");

    Instance inst;
    inst.r_max = r_max;
    inst.prompt_weights.assign(n_prompts, 1.0 / n_prompts);
    inst.ref_policy = Table(n_prompts, m_responses);
    inst.true_reward = Table(n_prompts, m_responses);
    inst.needle.assign(n_prompts, -1);

    // Needle sits at the last index; only rewards are randomized.
    const double other_mass = (1.0 - needle_ref_mass) / (m_responses - 1);
    const double reward_lo = std::min(0.0, reward_gap - r_max);
    for (int x = 0; x < n_prompts; ++x) {
        const int k = m_responses - 1;
        inst.needle[x] = k;
        double max_other = reward_lo;
        for (int y = 0; y < m_responses; ++y) {
            inst.ref_policy.at(x, y) = (y == k) ? needle_ref_mass : other_mass;
            if (y != k) {
                const double r = rng.uniform(reward_lo, 0.0);
                inst.true_reward.at(x, y) = r;
                max_other = std::max(max_other, r);
            }
        }
        inst.true_reward.at(x, k) = max_other + reward_gap;
    }
    inst.validate();
    return inst;
}

} // namespace geb
