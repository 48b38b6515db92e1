import { setupConsole } from "./ui.js";

// same-origin by default; set window.BIASBENCH_URL before loading to point
// the console at a service on another host/port
declare global {
  interface Window {
    BIASBENCH_URL?: string;
  }
}

setupConsole(window.BIASBENCH_URL ?? "");
