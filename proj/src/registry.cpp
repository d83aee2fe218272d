#include "hypoips/registry.hpp"

namespace hypoips {

ModelRegistry::ModelRegistry()
{
    models_.emplace("ifhn", AnyModel("ifhn", models::InteractingFHN{}, {"a", "b", "c", "kappa", "sigma"}));
    models_.emplace("ilangevin1d",
                    AnyModel("ilangevin1d", models::InteractingLangevin1D{}, {"lambda", "gamma", "kappa", "sigma"}));
    models_.emplace("mfou", AnyModel("mfou", models::MeanFieldEllipticOU{}, {"kappa", "sigma"}));
}

ModelRegistry& ModelRegistry::global()
{
    static ModelRegistry r;
    return r;
}

void ModelRegistry::add(AnyModel model)
{
    if (model.empty() || model.id().empty()) {
        throw std::invalid_argument("registered models need an id");
    }
    const std::lock_guard lock(mu_);
    const std::string id = model.id();
    models_.insert_or_assign(id, std::move(model));
}

AnyModel ModelRegistry::get(const std::string& id) const
{
    const std::lock_guard lock(mu_);
    const auto it = models_.find(id);
    if (it == models_.end()) {
        std::string known;
        for (const auto& [k, v] : models_) {
            known += (known.empty() ? "" : ", ") + k;
        }
        throw ConfigError("unknown model id '" + id + "' (known: " + known + ")");
    }
    return it->second;
}

bool ModelRegistry::contains(const std::string& id) const
{
    const std::lock_guard lock(mu_);
    return models_.count(id) > 0;
}

std::vector<std::string> ModelRegistry::ids() const
{
    const std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : models_) {
        out.push_back(k);
    }
    return out;
}

}  // namespace hypoips
