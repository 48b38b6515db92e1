// DOM wiring for the console: grid-snapped sliders, live frame, metric
// readouts, and demonstration capture.

import { BiasBenchClient } from "./api.js";
import { ConsoleSession, ConsoleState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function setupConsole(baseUrl = ""): ConsoleSession {
  const client = new BiasBenchClient(baseUrl);
  const session = new ConsoleSession(client);

  const sceneSelect = el<HTMLSelectElement>("scene");
  const startBtn = el<HTMLButtonElement>("start");
  const offSlider = el<HTMLInputElement>("off-slider");
  const onSlider = el<HTMLInputElement>("on-slider");
  const offValue = el<HTMLSpanElement>("off-value");
  const onValue = el<HTMLSpanElement>("on-value");
  const commitBtn = el<HTMLButtonElement>("commit");
  const markBtn = el<HTMLButtonElement>("mark-optimal");
  const recordBtn = el<HTMLButtonElement>("record-delta");
  const demoBadge = el<HTMLSpanElement>("demo-count");
  const frameImg = el<HTMLImageElement>("frame");
  const erOut = el<HTMLSpanElement>("event-rate");
  const winOut = el<HTMLSpanElement>("window-events");
  const metricsOut = el<HTMLPreElement>("metrics");
  const banner = el<HTMLDivElement>("banner");
  const autoRefresh = el<HTMLInputElement>("auto-refresh");

  function sliderIndexToValue(slider: HTMLInputElement, axis: number[]): number {
    const idx = Math.min(axis.length - 1, Math.max(0, Number(slider.value)));
    return axis[idx] ?? 0;
  }

  function valueToSliderIndex(value: number, axis: number[]): number {
    const idx = axis.indexOf(value);
    return idx >= 0 ? idx : 0;
  }

  function axisOf(name: string): number[] {
    return session.grid[name] ?? [0];
  }

  function showPendingLabels(): void {
    offValue.textContent = String(sliderIndexToValue(offSlider, axisOf("diff_off")));
    onValue.textContent = String(sliderIndexToValue(onSlider, axisOf("diff_on")));
  }

  function render(state: ConsoleState): void {
    if (state.biases) {
      // sliders snap to the server-confirmed tuple unless the user is
      // holding a pending value
      if (!state.pending) {
        offSlider.value = String(valueToSliderIndex(state.biases.diff_off, axisOf("diff_off")));
        onSlider.value = String(valueToSliderIndex(state.biases.diff_on, axisOf("diff_on")));
        showPendingLabels();
      }
    }
    if (state.frameUrl) frameImg.src = state.frameUrl;
    erOut.textContent = state.eventRate === null ? "-" : `${Math.round(state.eventRate)} ev/s`;
    winOut.textContent = state.windowEvents === null ? "-" : String(state.windowEvents);
    metricsOut.textContent = JSON.stringify(state.cachedMetrics, null, 1);
    demoBadge.textContent = String(state.demoCount);
    banner.textContent = state.error ?? "";
    banner.style.display = state.error ? "block" : "none";
    commitBtn.disabled = state.busy || !state.sessionId;
    markBtn.disabled = !state.sessionId;
    recordBtn.disabled = !state.sessionId || !state.lastCommittedDelta;
  }

  session.onChange(render);

  startBtn.addEventListener("click", () => {
    void (async () => {
      try {
        await session.start(sceneSelect.value, { diff_off: 0, diff_on: 0 });
        const offAxis = axisOf("diff_off");
        const onAxis = axisOf("diff_on");
        offSlider.max = String(offAxis.length - 1);
        onSlider.max = String(onAxis.length - 1);
        render(session.state);
      } catch (err) {
        banner.textContent = err instanceof Error ? err.message : String(err);
        banner.style.display = "block";
      }
    })();
  });

  offSlider.addEventListener("input", showPendingLabels);
  onSlider.addEventListener("input", showPendingLabels);

  commitBtn.addEventListener("click", () => {
    const pending = session.snapPending({
      diff_off: sliderIndexToValue(offSlider, axisOf("diff_off")),
      diff_on: sliderIndexToValue(onSlider, axisOf("diff_on")),
    });
    void session.commit(pending);
  });

  markBtn.addEventListener("click", () => void session.recordDemo("mark_optimal"));
  recordBtn.addEventListener("click", () => void session.recordDemo("record_delta"));

  let timer: number | null = null;
  autoRefresh.addEventListener("change", () => {
    if (autoRefresh.checked) {
      timer = window.setInterval(() => void session.refresh(), 1000);
    } else if (timer !== null) {
      window.clearInterval(timer);
      timer = null;
    }
  });

  void client
    .scenes()
    .then((scenes) => {
      sceneSelect.innerHTML = "";
      for (const id of Object.keys(scenes)) {
        const opt = document.createElement("option");
        opt.value = id;
        opt.textContent = id;
        sceneSelect.appendChild(opt);
      }
    })
    .catch((err) => {
      banner.textContent = `service unreachable: ${err}`;
      banner.style.display = "block";
    });

  return session;
}
