#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "grn/eval.hpp"
#include "grn/preprocess.hpp"
#include "grn/train.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Replay-driven online control of a robotic drinking task: 5-second
// acquisitions, five 3-second windows (500 ms stride), per-window softmax
// fused by averaging, argmax command. Blink vetoes the previous action,
// nodding resets the arm and fails the task.
// ---------------------------------------------------------------------------

struct Acquisition {
    Tensor grid;     // 5×5×T grid at fs, T >= 5 s worth of samples
    double fs = 250.0;
    int intent = -1; // ground-truth class, for scoring only
};

struct CommandDecision {
    std::vector<std::vector<double>> sigma;  // n_windows × K, each row sums to 1
    std::vector<double> fused;               // K
    int cmd = 0;                              // argmax of fused, ties to lowest id
    double duration_s = 0.0;                  // simulated clock charged to this decision
};

// Mean of the per-window softmax vectors; ties break to the lowest class id.
inline CommandDecision fuse_command(const Acquisition& acq, const std::vector<Prototype>& protos,
                                    GrnParams& P, int n_windows = 5) {
    if (acq.grid.ndim() != 3 || double(acq.grid.dim(2)) < 5.0 * acq.fs)
        fail(ErrorKind::Length, "fuse_command: acquisition shorter than 5 s");
    CommandDecision d;
    const auto wins = sliding_windows(acq.grid, acq.fs, 3.0, 0.5, n_windows);
    const int K = int(protos.size());
    d.fused.assign(size_t(K), 0.0);
    for (const auto& w : wins) {
        GridEpoch e;
        e.grid = w;
        e.fs = acq.fs;
        const auto p = predict(e, protos, P);
        for (int k = 0; k < K; ++k) d.fused[size_t(k)] += p.sigma[size_t(k)];
        d.sigma.push_back(p.sigma);
    }
    for (auto& v : d.fused) v /= double(wins.size());
    d.cmd = 0;
    for (int k = 1; k < K; ++k)
        if (d.fused[size_t(k)] > d.fused[size_t(d.cmd)]) d.cmd = k;
    return d;
}

// ---------------------------------------------------------------------------
// Drinking-task state machine. Sub-part command ids: 0 upper-arm (reach),
// 1 forearm (twist), 2 hand (grasp). Required sequence: reach, grasp, twist.
// ---------------------------------------------------------------------------

enum class TaskPhase { Init, Reached, Grasped, Drinking };

enum class EventKind { Command, BlinkVeto, NodReset };

struct TaskState {
    TaskPhase phase = TaskPhase::Init;
    std::vector<TaskPhase> history;  // phases before each forward transition
    int wrong_moves = 0;             // pending mis-moves the arm must undo
    bool failed = false;

    bool terminal() const { return failed || phase == TaskPhase::Drinking; }
};

inline int expected_command(TaskPhase p) {
    switch (p) {
        case TaskPhase::Init: return 0;
        case TaskPhase::Reached: return 2;
        case TaskPhase::Grasped: return 1;
        default: return -1;
    }
}

inline TaskPhase next_phase(TaskPhase p) {
    switch (p) {
        case TaskPhase::Init: return TaskPhase::Reached;
        case TaskPhase::Reached: return TaskPhase::Grasped;
        default: return TaskPhase::Drinking;
    }
}

// A wrong command leaves the arm off-track; further commands cannot advance
// the task until vetoes clear the wrong moves. Veto with a clean slate pops
// the last forward transition (no-op on empty history). Nod always resets to
// Init and records a failure.
inline TaskState task_step(TaskState s, EventKind kind, int cmd = -1) {
    if (s.terminal()) fail(ErrorKind::Protocol, "task_step: event on terminal state");
    switch (kind) {
        case EventKind::Command:
            if (s.wrong_moves == 0 && cmd == expected_command(s.phase)) {
                s.history.push_back(s.phase);
                s.phase = next_phase(s.phase);
            } else {
                ++s.wrong_moves;
            }
            break;
        case EventKind::BlinkVeto:
            if (s.wrong_moves > 0) {
                --s.wrong_moves;
            } else if (!s.history.empty()) {
                s.phase = s.history.back();
                s.history.pop_back();
            }
            break;
        case EventKind::NodReset:
            s.phase = TaskPhase::Init;
            s.history.clear();
            s.wrong_moves = 0;
            s.failed = true;
            break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Session replay.
// ---------------------------------------------------------------------------

struct Timing {
    double acquisition_s = 5.0;
    double actuation_s = 4.0 / 3.0;  // 3 perfect commands -> 19 s
    double event_s = 1.0;            // scripted blink/nod cost

    double command_cycle() const { return acquisition_s + actuation_s; }
};

struct SessionEvent {
    EventKind kind = EventKind::Command;
    Acquisition acq;  // used when kind == Command
};

struct TaskScript {
    std::vector<SessionEvent> events;
};

struct TaskOutcome {
    bool success = false;
    int commands = 0;
    int correct_commands = 0;  // decoded cmd matched the acquisition intent
    double control_time_s = 0.0;
    TaskState final_state;
};

struct SessionStats {
    int n_tasks = 0;
    int n_success = 0;
    double success_rate = 0.0;
    double mean_commands = 0.0, std_commands = 0.0;
    double mean_time_s = 0.0, std_time_s = 0.0;
    double command_accuracy = 0.0;  // decoded vs scripted intent, all commands
    std::vector<TaskOutcome> tasks;
};

using Decoder = std::function<CommandDecision(const Acquisition&)>;

inline TaskOutcome run_task(const TaskScript& script, const Decoder& decode,
                            const Timing& timing) {
    TaskOutcome out;
    TaskState s;
    for (const auto& ev : script.events) {
        if (s.terminal()) break;
        if (ev.kind == EventKind::Command) {
            const auto d = decode(ev.acq);
            ++out.commands;
            if (ev.acq.intent >= 0 && d.cmd == ev.acq.intent) ++out.correct_commands;
            out.control_time_s += timing.command_cycle();
            s = task_step(s, EventKind::Command, d.cmd);
        } else {
            out.control_time_s += timing.event_s;
            s = task_step(s, ev.kind);
        }
    }
    out.success = s.phase == TaskPhase::Drinking && !s.failed;
    out.final_state = s;
    return out;
}

inline SessionStats run_session(const std::vector<TaskScript>& tasks, const Decoder& decode,
                                const Timing& timing = {}) {
    if (tasks.empty()) fail(ErrorKind::Parameter, "run_session: no tasks");
    SessionStats st;
    st.n_tasks = int(tasks.size());
    int total_cmds = 0, total_correct = 0;
    for (const auto& t : tasks) {
        auto out = run_task(t, decode, timing);
        st.n_success += out.success ? 1 : 0;
        total_cmds += out.commands;
        total_correct += out.correct_commands;
        st.tasks.push_back(std::move(out));
    }
    st.success_rate = double(st.n_success) / st.n_tasks;
    st.command_accuracy = total_cmds ? double(total_correct) / total_cmds : 0.0;
    double sc = 0, sc2 = 0, tt = 0, tt2 = 0;
    for (const auto& t : st.tasks) {
        sc += t.commands;
        sc2 += double(t.commands) * t.commands;
        tt += t.control_time_s;
        tt2 += t.control_time_s * t.control_time_s;
    }
    st.mean_commands = sc / st.n_tasks;
    st.mean_time_s = tt / st.n_tasks;
    const double vc = sc2 / st.n_tasks - st.mean_commands * st.mean_commands;
    const double vt = tt2 / st.n_tasks - st.mean_time_s * st.mean_time_s;
    st.std_commands = std::sqrt(vc > 0 ? vc : 0);
    st.std_time_s = std::sqrt(vt > 0 ? vt : 0);
    return st;
}

inline Decoder model_decoder(const FittedModel& m) {
    return [&m](const Acquisition& a) {
        return fuse_command(a, m.prototypes, const_cast<GrnParams&>(m.params));
    };
}

inline std::string stats_report(const SessionStats& st) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "tasks %d\nsuccess_rate %.4f\ncommands %.2f +- %.2f\n"
                  "control_time_s %.2f +- %.2f\ncommand_accuracy %.4f\n",
                  st.n_tasks, st.success_rate, st.mean_commands, st.std_commands, st.mean_time_s,
                  st.std_time_s, st.command_accuracy);
    return buf;
}

}  // namespace grn
