// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "mmsound/common.hpp"

namespace mmsound::jsonutil {

using nlohmann::json;

// Rejects any key of `obj` not listed in `allowed`.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    require(obj.is_object(), where + ": expected an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || item.key() == a;
        require(ok, where + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback)
{
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("field '") + key + "': " + e.what());
    }
}

template <typename T>
T get_req(const json& obj, const char* key, const std::string& where)
{
    require(obj.contains(key), where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where + ": field '" + key + "': " + e.what());
    }
}

inline json parse(const std::string& text, const std::string& where)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

inline json complex_json(const cplx& c) { return json::array({c.real(), c.imag()}); }

inline cplx complex_from(const json& j, const std::string& where)
{
    require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(), where + ": expected [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace mmsound::jsonutil
