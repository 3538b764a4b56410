#ifndef DHASH_SCHEDULE_POINT_HPP
#define DHASH_SCHEDULE_POINT_HPP

// Named program points inside the list and table algorithms. When the build
// defines DHASH_SCHEDULE_POINTS, each point calls the installed hook (if any),
// which lets tests park threads at exact step boundaries or inject yields.
// Without the define the macro expands to nothing.

#include <atomic>
#include <cstdint>
#include <string_view>

#include "dhash/config.hpp"

namespace dhash {

enum class SchedulePoint : std::uint8_t {
  // Ordered list internals.
  kListAdvance,
  kListBeforeUnlinkCas,
  kListBeforeInsertCas,
  kListBeforeMarkCas,
  // Rebuild, per distributed node.
  kRebuildBeforeWriteCur,
  kRebuildAfterWriteCur,
  kRebuildAfterOldDelete,
  kRebuildAfterNewInsert,
  kRebuildAfterClearCur,
  // Lookup stages.
  kLookupBeforeOldFind,
  kLookupBeforeCurCheck,
  kLookupBeforeNewFind,
  // Delete stages.
  kDeleteBeforeOldDelete,
  kDeleteBeforeCurCheck,
  kDeleteBeforeNewDelete,
  // Insert stages.
  kInsertBegin,
  kInsertBeforeLink,
};

inline constexpr std::string_view to_string(SchedulePoint p) {
  switch (p) {
    case SchedulePoint::kListAdvance: return "list.advance";
    case SchedulePoint::kListBeforeUnlinkCas: return "list.before_unlink_cas";
    case SchedulePoint::kListBeforeInsertCas: return "list.before_insert_cas";
    case SchedulePoint::kListBeforeMarkCas: return "list.before_mark_cas";
    case SchedulePoint::kRebuildBeforeWriteCur: return "rebuild.before_write_cur";
    case SchedulePoint::kRebuildAfterWriteCur: return "rebuild.after_write_cur";
    case SchedulePoint::kRebuildAfterOldDelete: return "rebuild.after_old_delete";
    case SchedulePoint::kRebuildAfterNewInsert: return "rebuild.after_new_insert";
    case SchedulePoint::kRebuildAfterClearCur: return "rebuild.after_clear_cur";
    case SchedulePoint::kLookupBeforeOldFind: return "lookup.before_old_find";
    case SchedulePoint::kLookupBeforeCurCheck: return "lookup.before_cur_check";
    case SchedulePoint::kLookupBeforeNewFind: return "lookup.before_new_find";
    case SchedulePoint::kDeleteBeforeOldDelete: return "delete.before_old_delete";
    case SchedulePoint::kDeleteBeforeCurCheck: return "delete.before_cur_check";
    case SchedulePoint::kDeleteBeforeNewDelete: return "delete.before_new_delete";
    case SchedulePoint::kInsertBegin: return "insert.begin";
    case SchedulePoint::kInsertBeforeLink: return "insert.before_link";
  }
  return "?";
}

class ScheduleHook {
 public:
  virtual ~ScheduleHook() = default;
  virtual void at(SchedulePoint point, Key key) = 0;
};

namespace detail {
inline std::atomic<ScheduleHook*> g_schedule_hook{nullptr};
}

/// Installs `hook` process-wide; pass nullptr to remove. The caller keeps
/// ownership and must outlive every thread that may hit a point.
inline void set_schedule_hook(ScheduleHook* hook) noexcept {
  detail::g_schedule_hook.store(hook, std::memory_order_release);
}

inline constexpr bool schedule_points_enabled() noexcept {
#ifdef DHASH_SCHEDULE_POINTS
  return true;
#else
  return false;
#endif
}

}  // namespace dhash

#ifdef DHASH_SCHEDULE_POINTS
#define DHASH_SCHEDULE_POINT(point, key)                                      \
  do {                                                                        \
    if (auto* dhash_hook_ = ::dhash::detail::g_schedule_hook.load(            \
            std::memory_order_acquire))                                       \
      dhash_hook_->at((point), (key));                                        \
  } while (false)
#else
#define DHASH_SCHEDULE_POINT(point, key) ((void)0)
#endif

#endif  // DHASH_SCHEDULE_POINT_HPP
