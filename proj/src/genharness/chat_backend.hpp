#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

namespace gbias::genharness {

enum class ChatKind { HttpChat, Mock };

struct ChatBackendDescriptor {
  std::string name;
  ChatKind kind = ChatKind::Mock;
  std::string endpoint;
  std::string model_id;
  std::string auth_env;
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;
  int backoff_ms = 200;
  int timeout_s = 120;

  // mock only
  std::uint64_t seed = 0;
  double signal = 0.0;          // chance that a field takes its group's preferred value
  bool fenced = false;          // wrap replies in ```json fences
  double malformed_rate = 0.0;  // share of profiles emitted with a 2-item hobbies list
};

ChatBackendDescriptor chat_backend_from_json(const std::string& name, const nlohmann::json& j);
void validate(const ChatBackendDescriptor& d);

struct ChatRequest {
  std::string prompt;
  double temperature = 1.0;
  int repeat = 0;
};

// Implementations must be safe to call concurrently. Failures throw
// scoring::BackendError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual const std::string& model_id() const = 0;

  std::string complete(const ChatRequest& r) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_complete(r);
  }
  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::string do_complete(const ChatRequest& r) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

// Answers the profile prompt with deterministic synthetic profiles. Every
// field value is a hash of (seed, model, name, repeat, field); with
// probability `signal` it is replaced by a value fixed per (group, field), so
// group membership leaks into the profiles by a controlled amount.
class MockChatBackend final : public ChatBackend {
 public:
  MockChatBackend(ChatBackendDescriptor d, std::map<std::string, std::string> group_of_name);
  const std::string& model_id() const override { return desc_.model_id; }

 protected:
  std::string do_complete(const ChatRequest& r) override;

 private:
  ChatBackendDescriptor desc_;
  std::map<std::string, std::string> group_of_name_;
};

// Chat-completions wire format: {"model", "messages": [{"role": "user",
// "content"}], "temperature"}; the reply is choices[0].message.content.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(ChatBackendDescriptor d);
  const std::string& model_id() const override { return desc_.model_id; }

  static nlohmann::json request_body(const std::string& model_id, const ChatRequest& r);
  static std::string parse_response(const nlohmann::json& body);

 protected:
  std::string do_complete(const ChatRequest& r) override;

 private:
  ChatBackendDescriptor desc_;
};

std::unique_ptr<ChatBackend> make_chat_backend(const ChatBackendDescriptor& d,
                                               std::map<std::string, std::string> group_of_name = {});

}  // namespace gbias::genharness
