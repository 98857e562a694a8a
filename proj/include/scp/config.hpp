#pragma once

#include <fstream>
#include <map>
#include <sstream>

#include "runtime.hpp"

namespace scp {

// Plain key=value files: blank lines and #-comments ignored, whitespace
// around keys/values trimmed.
inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::decode_failure, "cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      raise(Errc::decode_failure, "config line without '=': " + line);
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

// Peers files map node id to address, one "id=host:port" per line.
inline std::vector<Place> parse_peers_file(const std::string& path) {
  std::vector<Place> out;
  for (const auto& [k, v] : parse_kv_file(path)) {
    Place p;
    try {
      p.node_id = std::stoi(k);
    } catch (...) {
      raise(Errc::decode_failure, "peer id '" + k + "' is not an integer");
    }
    p.address = v;
    out.push_back(std::move(p));
  }
  return out;
}

// Inline peer lists: "1@127.0.0.1:7001,2@127.0.0.1:7002".
inline std::vector<Place> parse_peer_list(const std::string& spec) {
  std::vector<Place> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t at = item.find('@');
    if (at == std::string::npos) raise(Errc::decode_failure, "peer entry without '@': " + item);
    Place p;
    p.node_id = std::stoi(item.substr(0, at));
    p.address = item.substr(at + 1);
    out.push_back(std::move(p));
  }
  return out;
}

inline Backend parse_backend(const std::string& s) {
  if (s == "generic") return Backend::generic;
  if (s == "specialized") return Backend::specialized;
  raise(Errc::decode_failure, "backend must be 'generic' or 'specialized', got '" + s + "'");
}

// "host:port" -> (host, port); a bare ":7001" listens on all interfaces.
inline std::pair<std::string, uint16_t> split_host_port(const std::string& addr) {
  size_t colon = addr.rfind(':');
  if (colon == std::string::npos) raise(Errc::decode_failure, "address without port: " + addr);
  std::string host = addr.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  int port = std::stoi(addr.substr(colon + 1));
  if (port < 0 || port > 65535) raise(Errc::decode_failure, "bad port in address: " + addr);
  return {host, static_cast<uint16_t>(port)};
}

}  // namespace scp
