import { ApiClient } from "./api";
import { TryOnStore } from "./state";
import { mountApp } from "./ui";
import "./style.css";

// Same-origin by default; override with e.g. <meta name="eyefit-api" content="http://host:8080">.
const meta = document.querySelector('meta[name="eyefit-api"]');
const api = new ApiClient(meta?.getAttribute("content") ?? "");
const store = new TryOnStore(api);

mountApp(document.getElementById("app")!, store, api);
void store.init();
