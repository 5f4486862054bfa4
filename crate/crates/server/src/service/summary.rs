use std::fmt::Write;
use std::sync::Arc;

use meetcues_core::{MeetingId, SummaryReport};

use super::{Role, Service, SummaryStatus};
use crate::error::{ServiceError, ServiceResult};

impl Service {
    /// Host-only synchronous regeneration.
    pub fn generate_summary(&self, token: Option<&str>, meeting: &MeetingId) -> ServiceResult<Arc<SummaryReport>> {
        if self.authorize(token, meeting)? != Role::Host {
            return Err(ServiceError::Forbidden("only the host may regenerate the summary"));
        }
        self.finalize(meeting)
    }

    fn ready(&self, meeting: &MeetingId) -> ServiceResult<(Arc<Vec<u8>>, Arc<SummaryReport>)> {
        match &*self.handle(meeting)?.summary.lock() {
            SummaryStatus::Ready { json, report } => Ok((json.clone(), report.clone())),
            SummaryStatus::NotEnded | SummaryStatus::Pending => Err(ServiceError::Pending),
        }
    }

    /// Stored `summary.json` bytes.
    pub fn summary_json(&self, meeting: &MeetingId) -> ServiceResult<Arc<Vec<u8>>> {
        Ok(self.ready(meeting)?.0)
    }

    pub fn summary_report(&self, meeting: &MeetingId) -> ServiceResult<Arc<SummaryReport>> {
        Ok(self.ready(meeting)?.1)
    }

    /// WAV bytes of snippet `index`.
    pub fn snippet_bytes(&self, meeting: &MeetingId, index: usize) -> ServiceResult<Vec<u8>> {
        let report = self.summary_report(meeting)?;
        let snippet = report.snippets.get(index).ok_or(ServiceError::NotFound("snippet"))?;
        self.shared.store.read_snippet(&snippet.path)?.ok_or(ServiceError::NotFound("snippet"))
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn clock(seconds: f64) -> String {
    let s = seconds.round() as u64;
    format!("{}:{:02}", s / 60, s % 60)
}

/// Self-contained summary page. The full report is embedded as JSON; the
/// audio section is present only when there are snippets.
pub fn render_html(report: &SummaryReport) -> String {
    let meeting = &report.meeting;
    let mut html = String::new();
    let title = escape(&meeting.title);
    let _ = write!(
        html,
        "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title} summary</title>\n\
         <style>body{{font-family:sans-serif;max-width:48rem;margin:2rem auto}}\
         .face{{display:inline-block;border-radius:50%;margin:2px;text-align:center}}\
         .bar{{display:inline-block;width:6px;margin-right:1px;background:#00a39b;vertical-align:bottom}}</style>\n\
         </head>\n<body>\n<h1>{title}</h1>\n<p>{} attendees</p>\n",
        report.attendee_count
    );

    html.push_str("<section id=\"cloud\">\n");
    for e in &report.cloud.emojis {
        let px = (24.0 * e.size_scale).round();
        let glyph = match e.expression {
            meetcues_core::Expression::Happy => "&#128578;",
            meetcues_core::Expression::Neutral => "&#128528;",
            meetcues_core::Expression::Thinking => "&#129300;",
        };
        let (r, g, b) = (e.color.0, e.color.1, e.color.2);
        let _ = writeln!(
            html,
            "<span class=\"face\" style=\"background:rgb({r},{g},{b});width:{px}px;height:{px}px;line-height:{px}px\">{glyph}</span>"
        );
    }
    html.push_str("</section>\n<section id=\"timeline\">\n");
    for b in &report.timeline {
        let height = (60.0 * b.norm).round();
        let _ = writeln!(
            html,
            "<span class=\"bar\" style=\"height:{height}px\" title=\"{}: {} reactions, {} comments\"></span>",
            clock(b.start_s as f64),
            b.reactions,
            b.comments
        );
    }
    html.push_str("</section>\n");

    if !report.snippets.is_empty() {
        html.push_str("<section id=\"snippets\">\n<h2>Memorable moments</h2>\n");
        for (i, s) in report.snippets.iter().enumerate() {
            let _ = writeln!(
                html,
                "<figure><figcaption>{} to {}</figcaption><audio controls preload=\"none\" src=\"/summary/{}/snippets/{i}\"></audio></figure>",
                clock(s.start_s),
                clock(s.end_s),
                meeting.meeting_id
            );
        }
        html.push_str("</section>\n");
    }

    html.push_str("<section id=\"comments\">\n<h2>Comments</h2>\n<ol>\n");
    for c in &report.comments_popular {
        let _ = writeln!(html, "<li>{} <small>({} upvotes)</small></li>", escape(c.text.as_str()), c.upvotes);
    }
    html.push_str("</ol>\n</section>\n");

    // `<`, `>` and `&` only occur inside JSON strings, where \u escapes are equivalent
    let json = serde_json::to_string(report)
        .unwrap_or_default()
        .replace('<', "\\u003c")
        .replace('>', "\\u003e")
        .replace('&', "\\u0026");
    let _ = write!(html, "<script type=\"application/json\" id=\"report\">{json}</script>\n</body>\n</html>\n");
    html
}

#[cfg(test)]
mod tests {
    use super::*;
    use meetcues_core::report::build_report;
    use meetcues_core::*;

    fn report(title: &str, snippets: usize) -> SummaryReport {
        let id = MeetingId::new("m1").unwrap();
        let session = MeetingSession::new(
            id.clone(),
            Hashtag::new("abcdef").unwrap(),
            title,
            "h",
            true,
            Salt::from_bytes([0; 16]),
        )
        .unwrap()
        .start(0)
        .unwrap()
        .end(600_000)
        .unwrap();
        let snippets = (0..snippets)
            .map(|i| AudioSnippet {
                meeting_id: id.clone(),
                start_s: i as f64 * 120.0,
                end_s: i as f64 * 120.0 + 60.0,
                path: format!("m1/snippets/{i}.wav"),
                peak_norm: 1.0,
            })
            .collect();
        build_report(&session, &[], &[], snippets, Vec::new(), &SnippetConfig::default())
    }

    #[test]
    fn page_contains_title() {
        assert!(render_html(&report("Quarterly <review>", 0)).contains("<h1>Quarterly &lt;review&gt;</h1>"));
    }

    #[test]
    fn audio_section_only_with_snippets() {
        let none = render_html(&report("T", 0));
        assert!(!none.contains("<audio"));
        assert!(!none.contains("id=\"snippets\""));
        let three = render_html(&report("T", 3));
        assert_eq!(three.matches("<audio").count(), 3);
        assert!(three.contains("src=\"/summary/m1/snippets/2\""));
    }

    #[test]
    fn embedded_json_cannot_close_the_script() {
        let page = render_html(&report("</script><b>", 0));
        assert_eq!(page.matches("</script>").count(), 1);
    }
}
