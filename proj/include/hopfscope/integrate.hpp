#pragma once

// Dormand-Prince 5(4) integration with PI step control, 4th-order dense output
// and event location on the interpolant.

#include "hopfscope/linalg.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace hopfscope::integrate {

struct IntegratorConfig {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    /// Longest model-time span a single call may cover; the run stops with
    /// Status::max_time_exceeded when t1 - t0 is larger and nothing terminal happens first.
    double max_time = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  // 0: automatic
    std::size_t max_steps = 100'000'000;
    bool store_dense = true;
    /// Store every n-th accepted step in times/states (the final state is always stored).
    std::size_t record_stride = 1;
    double event_time_tol = 1e-12;
    /// Stop (as a terminal event) once this many events are logged; 0 = no limit.
    std::size_t max_events = 0;

    void validate() const;
};

enum class Direction { rising, falling, both };
enum class EventKind { plane, cylinder, angle, norm };

struct EventSpec {
    EventKind kind = EventKind::plane;
    Direction direction = Direction::both;
    double value = 0.0;  // plane offset, cylinder radius, angle, norm radius
    int axis = 0;        // plane: 0-based coordinate index
    double window_lo = -std::numeric_limits<double>::infinity();  // cylinder: x1 window
    double window_hi = std::numeric_limits<double>::infinity();
    bool terminal = false;
    std::string label;

    /// x[axis] = offset
    static EventSpec plane(int axis, double offset, Direction dir = Direction::both,
                           bool terminal = false);
    /// sqrt(x2^2 + x3^2) = radius with x1 inside [x1_lo, x1_hi]
    static EventSpec cylinder(double radius, double x1_lo, double x1_hi,
                              Direction dir = Direction::both, bool terminal = false);
    /// polar angle of (x2, x3) equals theta; rising is counterclockwise
    static EventSpec angle(double theta, Direction dir = Direction::rising, bool terminal = false);
    /// |x| = radius
    static EventSpec norm(double radius, Direction dir = Direction::both, bool terminal = false);

    double g(const Vec3& x) const;
    /// Side conditions checked at the located crossing (window, half-plane).
    bool admissible(const Vec3& x) const;
    std::string name() const;
    void validate() const;
};

/// Interpolant of one accepted step [t0, t0 + h]; valid up to t_end, which is earlier
/// than t0 + h only on a step cut short by a terminal event.
struct DenseSegment {
    double t0 = 0.0;
    double h = 0.0;
    double t_end = 0.0;
    std::array<Vec3, 5> r{};

    double t1() const { return t_end; }
    Vec3 eval(double t) const;
};

struct EventRecord {
    double t = 0.0;
    int spec = -1;
    std::string kind;
    Vec3 x = Vec3::Zero();
    bool rising = true;
};

enum class Status {
    completed,
    terminal_event,
    max_time_exceeded,
    step_underflow,
    domain_error,
    max_steps
};

std::string to_string(Status s);

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec3> states;
    std::vector<DenseSegment> dense;
    std::vector<EventRecord> events;
    Status status = Status::completed;
    std::string message;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;

    bool ok() const { return status == Status::completed || status == Status::terminal_event; }
    double t_end() const { return times.back(); }
    const Vec3& x_end() const { return states.back(); }
    /// Dense-output evaluation; throws if dense output was not stored or t is outside the span.
    Vec3 at(double t) const;
    std::vector<EventRecord> events_of(int spec) const;
};

/// Called for every accepted step with its interpolant.
using StepObserver = std::function<void(const DenseSegment&)>;

Trajectory integrate(const VectorField& field, const Vec3& x0, double t0, double t1,
                     const IntegratorConfig& cfg = {}, const std::vector<EventSpec>& events = {},
                     const StepObserver& observer = {});

/// Re-runs event location on stored dense output (same routine the integrator uses).
std::vector<EventRecord> locate_events(const Trajectory& traj, const std::vector<EventSpec>& events,
                                       double time_tol = 1e-12);

void write_csv(std::ostream& os, const Trajectory& traj);
void write_events_csv(std::ostream& os, const Trajectory& traj);

/// Dominant frequency (cycles per unit time) of uniformly sampled data: Hann window,
/// real FFT, parabolic interpolation of the peak bin. Throws NumericalError on a flat signal.
double dominant_frequency(const std::vector<double>& samples, double dt);

/// Resamples the final `fraction` of the trajectory uniformly (n points) on its dense output
/// and returns the dominant frequency of one coordinate.
double dominant_frequencies(const Trajectory& traj, int component, double fraction = 0.5,
                            std::size_t n = 16384);

}  // namespace hopfscope::integrate
